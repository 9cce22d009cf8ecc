//! Temporary sensitivity probe (not part of the deliverable).

use std::collections::BTreeSet;

use protomap::bitmap::{reference_mapping, BitMapping, MappingMode};
use protomap::pexit::{pexit_threshold, PexitOptions};
use protomap::protosys::BaseMatrix;
use protomap::signaling::{cond_entropy_bit, Signaling};
use protomap::util::db_to_linear;

fn main() {
    let text = std::fs::read_to_string("/root/scratch/surrogate_z256.bm").unwrap();
    let base = BaseMatrix::parse(&text).unwrap();
    let uni = Signaling::uniform_ask(3);
    let ids = base.transmitted_columns();
    let parity: BTreeSet<usize> = base.transmitted_parity_types().into_iter().collect();
    let _ = parity;

    for j in 1..=3 {
        println!(
            "H(B_{j}|Y) at 17 dB = {:.4}",
            cond_entropy_bit(&uni, db_to_linear(17.0), j)
        );
    }

    let opts = PexitOptions {
        window_db: (15.5, 19.0),
        tol_db: 0.001,
        ..Default::default()
    };
    let reference = reference_mapping(3, 66, MappingMode::Uniform, [], ids.clone()).unwrap();
    let th_ref = pexit_threshold(&base, &reference, &uni, &opts).unwrap();
    println!("reference: {th_ref:.4} dB");

    // concentrate level 1 fully on the 22 highest-degree transmitted types
    let mut degs: Vec<(u32, usize)> = ids
        .iter()
        .enumerate()
        .map(|(t, &c)| (base.column_degree(c), t))
        .collect();
    degs.sort_by(|a, b| b.cmp(a));
    let top: BTreeSet<usize> = degs.iter().take(22).map(|&(_, t)| t).collect();
    let mut rows = vec![vec![0.0f64; 66]; 3];
    for t in 0..66 {
        if top.contains(&t) {
            rows[0][t] = 1.0;
        } else {
            rows[1][t] = 0.5;
            rows[2][t] = 0.5;
        }
    }
    let conc = BitMapping::from_rows(rows, MappingMode::Uniform, [], ids.clone()).unwrap();
    let th_conc = pexit_threshold(&base, &conc, &uni, &opts).unwrap();
    println!("level-1-on-deg6: {th_conc:.4} dB (gain {:+.4})", th_ref - th_conc);

    // single-poll-sized perturbation: +0.25 of level 1 onto one deg-6 type
    let t6 = *top.iter().next().unwrap();
    let mut rows = vec![vec![1.0 / 3.0; 66]; 3];
    for t in 0..66 {
        if t == t6 {
            rows[0][t] += 0.25;
            rows[1][t] -= 0.125;
            rows[2][t] -= 0.125;
        } else {
            rows[0][t] -= 0.25 / 65.0;
            rows[1][t] += 0.125 / 65.0;
            rows[2][t] += 0.125 / 65.0;
        }
    }
    let poll = BitMapping::from_rows(rows, MappingMode::Uniform, [], ids.clone()).unwrap();
    let th_poll = pexit_threshold(&base, &poll, &uni, &opts).unwrap();
    println!("one-poll move: {th_poll:.4} dB (delta {:+.4})", th_ref - th_poll);
}
