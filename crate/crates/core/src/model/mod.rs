//! Domain types shared by every stage: the raw social network, the
//! anonymized release, and the pseudonym ground truth.

mod dataset;
mod io;
mod network;

pub use dataset::{AnonymizedDataset, CorpusStats, GroundTruth, UserPostMatrix};
pub use io::{
    load_dataset, load_network, load_truth, save_dataset, save_network, save_truth, FORMAT_VERSION,
};
pub use network::{degree_sequence, Direction, Post, SocialNetwork, UserId};
