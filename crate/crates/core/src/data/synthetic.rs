//! Small generated corpora with topic structure, for toy pretraining and
//! classification runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabeledText;

struct Topic {
    nouns: [&'static str; 6],
    verbs: [&'static str; 4],
    adjs: [&'static str; 4],
}

const TOPIC_WORDS: [Topic; 8] = [
    Topic {
        nouns: ["bread", "soup", "apple", "cheese", "rice", "cake"],
        verbs: ["bakes", "tastes", "cooks", "slices"],
        adjs: ["fresh", "sweet", "warm", "salty"],
    },
    Topic {
        nouns: ["dog", "cat", "horse", "rabbit", "goat", "owl"],
        verbs: ["chases", "feeds", "grooms", "follows"],
        adjs: ["furry", "wild", "tame", "sleepy"],
    },
    Topic {
        nouns: ["rain", "cloud", "storm", "wind", "snow", "fog"],
        verbs: ["covers", "soaks", "sweeps", "darkens"],
        adjs: ["cold", "grey", "heavy", "damp"],
    },
    Topic {
        nouns: ["ball", "goal", "team", "coach", "match", "racket"],
        verbs: ["kicks", "wins", "trains", "scores"],
        adjs: ["fast", "strong", "tired", "proud"],
    },
    Topic {
        nouns: ["guitar", "song", "drum", "choir", "piano", "melody"],
        verbs: ["plays", "sings", "tunes", "hums"],
        adjs: ["loud", "gentle", "catchy", "quiet"],
    },
    Topic {
        nouns: ["train", "ticket", "map", "harbor", "suitcase", "bridge"],
        verbs: ["boards", "crosses", "books", "reaches"],
        adjs: ["distant", "crowded", "early", "late"],
    },
    Topic {
        nouns: ["teacher", "lesson", "pupil", "exam", "chalk", "library"],
        verbs: ["studies", "grades", "reads", "explains"],
        adjs: ["clever", "strict", "curious", "long"],
    },
    Topic {
        nouns: ["hammer", "nail", "saw", "drill", "plank", "wrench"],
        verbs: ["fixes", "cuts", "builds", "tightens"],
        adjs: ["sharp", "rusty", "sturdy", "heavy"],
    },
];

pub const TOPICS: usize = TOPIC_WORDS.len();

fn sentence<R: Rng + ?Sized>(topic: usize, rng: &mut R) -> String {
    let t = &TOPIC_WORDS[topic];
    let n = |rng: &mut R| *t.nouns.choose(rng).expect("nonempty");
    let v = |rng: &mut R| *t.verbs.choose(rng).expect("nonempty");
    let a = |rng: &mut R| *t.adjs.choose(rng).expect("nonempty");
    match rng.random_range(0..4) {
        0 => format!("the {} {} {} the {}", a(rng), n(rng), v(rng), n(rng)),
        1 => format!("a {} {} near the {} {}", n(rng), v(rng), a(rng), n(rng)),
        2 => format!("the {} and the {} are {}", n(rng), n(rng), a(rng)),
        _ => format!("every {} {} a very {} {}", n(rng), v(rng), a(rng), n(rng)),
    }
}

fn opening<R: Rng + ?Sized>(topic: usize, rng: &mut R) -> String {
    let t = &TOPIC_WORDS[topic];
    let n = *t.nouns.choose(rng).expect("nonempty");
    let a = *t.adjs.choose(rng).expect("nonempty");
    if rng.random::<bool>() {
        format!("here is a tale of the {a} {n}")
    } else {
        format!("this story is about a {a} {n}")
    }
}

/// `n` sentences in documents of 2–4 sentences; every document sticks to one
/// topic and opens with an introductory sentence. Documents are separated
/// by blank lines.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut made = 0;
    let mut doc = 0;
    while made < n {
        let topic = doc % TOPICS;
        let len = rng.random_range(2..=4).min(n - made);
        if doc > 0 {
            lines.push(String::new());
        }
        for k in 0..len {
            lines.push(if k == 0 { opening(topic, &mut rng) } else { sentence(topic, &mut rng) });
        }
        made += len;
        doc += 1;
    }
    lines
}

/// `n` single sentences labeled by topic group: topic `t` belongs to class
/// `t % classes`.
pub fn synthetic_classification(n: usize, classes: usize, seed: u64) -> Vec<LabeledText> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let topic = rng.random_range(0..TOPICS);
            LabeledText {
                label: topic % classes.max(1),
                text: sentence(topic, &mut rng),
            }
        })
        .collect()
}
