//! Bundled example projects.

use crate::project::{load_project_str, Project};

/// Projects the acceptance criteria run on.
pub const CORPUS: &[(&str, &str)] = &[
    ("trivial", include_str!("../corpus/trivial.json")),
    ("elephant", include_str!("../corpus/elephant.json")),
    ("cat_bear", include_str!("../corpus/cat_bear.json")),
    ("two_if_guard", include_str!("../corpus/two_if_guard.json")),
    ("story_chain", include_str!("../corpus/story_chain.json")),
    ("maze", include_str!("../corpus/maze.json")),
    ("quiz", include_str!("../corpus/quiz.json")),
    ("zombie", include_str!("../corpus/zombie.json")),
];

/// Small projects used by unit and acceptance tests.
pub const FIXTURES: &[(&str, &str)] = &[
    ("goto_micro", include_str!("../corpus/goto_micro.json")),
    ("fitness_example", include_str!("../corpus/fitness_example.json")),
    ("mutation_fixture", include_str!("../corpus/mutation_fixture.json")),
];

/// Loads a bundled project or fixture by name.
pub fn load(name: &str) -> Project {
    let text = CORPUS
        .iter()
        .chain(FIXTURES)
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .unwrap_or_else(|| panic!("no bundled project `{name}`"));
    load_project_str(text).unwrap_or_else(|e| panic!("bundled project `{name}`: {e}"))
}

pub fn all() -> Vec<(&'static str, Project)> {
    CORPUS.iter().map(|(n, _)| (*n, load(n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_loads_without_warnings() {
        for (name, _) in CORPUS.iter().chain(FIXTURES) {
            let p = load(name);
            assert!(p.warnings.is_empty(), "{name}: {:?}", p.warnings);
        }
    }

    #[test]
    fn trivial_has_ten_blocks() {
        assert_eq!(load("trivial").blocks.len(), 10);
    }

    #[test]
    fn elephant_is_one_sprite_one_script() {
        let p = load("elephant");
        assert_eq!(p.actors.iter().filter(|a| !a.is_stage).count(), 1);
        assert_eq!(p.scripts.len(), 1);
    }
}
