//! The CTO objective next to the DPO, IPO and SimPO baselines on one item,
//! plus the two reduction identities.
//!
//! cargo run --example preference_losses

use cto::prefopt::{pair_loss, LossParams, LossVariant, PairBatchItem};

fn main() {
    let item = PairBatchItem::new((-3.0, -5.0), (-3.5, -4.5), 0.3).with_lengths(6, 7);
    for variant in [LossVariant::Cto, LossVariant::Dpo, LossVariant::Ipo, LossVariant::Simpo] {
        let params = LossParams::new(variant, 0.1, 0.5).unwrap();
        let v = pair_loss(&item, &params).unwrap();
        println!("{:<6} loss {:.6}  dL/dlogp(chosen) {:+.6}", variant.name(), v.loss, v.grad.policy_chosen);
    }

    let cto_w1 = pair_loss(&item, &LossParams::new(LossVariant::Cto, 0.1, 1.0).unwrap()).unwrap();
    let dpo = pair_loss(&item, &LossParams::new(LossVariant::Dpo, 0.1, 1.0).unwrap()).unwrap();
    println!("w = 1: cto {:.12} dpo {:.12}", cto_w1.loss, dpo.loss);

    let no_reward = PairBatchItem::new((-3.0, -5.0), (-3.5, -4.5), 0.0);
    let cto = pair_loss(&no_reward, &LossParams::new(LossVariant::Cto, 0.1, 0.5).unwrap()).unwrap();
    let dpo = pair_loss(&no_reward, &LossParams::new(LossVariant::Dpo, 0.2, 1.0).unwrap()).unwrap();
    println!("delta_reward = 0: cto(beta 0.1, w 0.5) {:.12} dpo(beta 0.2) {:.12}", cto.loss, dpo.loss);
}
