//! Small planted corpora used to exercise copying and template recovery.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{tokenize, AttributeValue, Example, MeaningRepresentation};

pub const FOODS: [&str; 6] = ["italian", "french", "chinese", "indian", "english", "japanese"];
pub const AREAS: [&str; 2] = ["riverside", "centre"];

const ONSETS: [&str; 8] = ["b", "d", "k", "l", "m", "r", "s", "t"];
const NUCLEI: [&str; 4] = ["a", "e", "o", "u"];
const CODAS: [&str; 4] = ["n", "x", "sh", "rk"];

/// Distinct single-token restaurant names (at most 128).
pub fn names(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for o in ONSETS {
        for v in NUCLEI {
            for c in CODAS {
                if out.len() == n {
                    return out;
                }
                out.push(format!("{o}{v}{c}o"));
            }
        }
    }
    out
}

/// A name produced by none of the generators above.
pub const HELD_OUT_NAME: &str = "zyqwell";

fn mr(name: &str, food: &str, area: &str) -> MeaningRepresentation {
    let pair = |k: &str, v: &str| AttributeValue {
        key: k.to_string(),
        value: vec![v.to_string()],
    };
    MeaningRepresentation::new(vec![pair("name", name), pair("food", food), pair("area", area)])
        .expect("distinct keys")
}

/// Copy-task pair for one attribute triple.
pub fn copy_example(name: &str, food: &str, area: &str) -> Example {
    Example {
        mr: mr(name, food, area),
        references: vec![tokenize(&format!("{name} serves {food} food in the {area} area ."))],
    }
}

/// `n` single-reference pairs whose targets echo every source value.
pub fn copy_task(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = names(40);
    (0..n)
        .map(|_| {
            copy_example(
                pool.choose(&mut rng).unwrap(),
                FOODS.choose(&mut rng).unwrap(),
                AREAS.choose(&mut rng).unwrap(),
            )
        })
        .collect()
}

/// Realizes template 0 or 1; the two share no word outside the values.
pub fn template_text(template: usize, name: &str, food: &str, area: &str) -> String {
    match template {
        0 => format!("{name} is a {food} restaurant by the {area} ."),
        _ => format!("visit {name} for {food} dishes near {area} !"),
    }
}

/// `per_template` examples of each template, shuffled, with the planted
/// template label of every example.
pub fn two_template_corpus(per_template: usize, seed: u64) -> (Vec<Example>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = names(40);
    let mut rows: Vec<(Example, usize)> = Vec::with_capacity(2 * per_template);
    for template in 0..2 {
        for _ in 0..per_template {
            let name = pool[rng.gen_range(0..pool.len())].as_str();
            let food = FOODS[rng.gen_range(0..FOODS.len())];
            let area = AREAS[rng.gen_range(0..AREAS.len())];
            rows.push((
                Example {
                    mr: mr(name, food, area),
                    references: vec![tokenize(&template_text(template, name, food, area))],
                },
                template,
            ));
        }
    }
    rows.shuffle(&mut rng);
    rows.into_iter().unzip()
}
