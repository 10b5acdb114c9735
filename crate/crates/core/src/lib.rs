pub mod analysis;
pub mod article_sim;
pub mod bench;
pub mod corpus;
pub mod event;
pub mod matching;
pub mod networks;
pub mod providers;
pub mod sweep;
