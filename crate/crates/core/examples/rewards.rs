//! Listwise semantic rewards from cosines and the combined oracle reward.
//!
//! cargo run --example rewards

use cto::reward::{combined_reward, rewards_from_cosines};

fn main() {
    for entry in rewards_from_cosines(&[0.9, 0.5, 0.1]) {
        println!("{entry:?}");
    }
    println!("degenerate list: {:?}", rewards_from_cosines(&[0.4, 0.4]));
    println!("r* (w=0.5, r_g=1, r_s=0.4) = {}", combined_reward(1.0, 0.4, 0.5).unwrap());
}
