pub mod config;
pub mod corpus;
pub mod embed;
pub mod http;
pub mod metrics;
pub mod sync;
pub mod tokenize;
pub mod noise;
pub mod prompt;
pub mod llm;
pub mod clean;
pub mod augment;
pub mod eval;
pub mod report;
pub mod preference;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpora.md")]
    mod corpora {}
    #[doc = include_str!("../../../book/src/cleaning.md")]
    mod cleaning {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/preference.md")]
    mod preference {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
