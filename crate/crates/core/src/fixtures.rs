//! Bundled data files: surrogate lexicons, the dictionary gazetteer, the
//! placeholder category mapping and the sentence template bank. The same files ship under `crates/core/data/`.

pub const MALE_FIRST: &str = include_str!("../data/male_first.tsv");
pub const FEMALE_FIRST: &str = include_str!("../data/female_first.tsv");
pub const SURNAMES: &str = include_str!("../data/surnames.tsv");
pub const HOSPITALS: &str = include_str!("../data/hospitals.tsv");
pub const CITIES: &str = include_str!("../data/cities.tsv");
pub const GAZETTEER_MALE_FIRST: &str = include_str!("../data/gazetteer/male_first.tsv");
pub const GAZETTEER_FEMALE_FIRST: &str = include_str!("../data/gazetteer/female_first.tsv");
pub const GAZETTEER_SURNAMES: &str = include_str!("../data/gazetteer/surnames.tsv");
pub const GAZETTEER_HOSPITALS: &str = include_str!("../data/gazetteer/hospitals.tsv");
pub const CATEGORY_MAPPING: &str = include_str!("../data/category_mapping.tsv");
pub const TEMPLATES: &str = include_str!("../data/templates.txt");
