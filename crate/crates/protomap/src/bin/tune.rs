//! Temporary surrogate-design harness (not part of the deliverable).

use std::collections::BTreeSet;
use std::time::Instant;

use protomap::bitmap::{
    optimize_successive, reference_mapping, BitMapping, MappingMode, PatternSearchOptions,
    SuccessiveOptions,
};
use protomap::dde::{self, DdeParams, ThresholdOptions};
use protomap::pexit::{pexit_threshold, PexitOptions};
use protomap::protosys::{build_encoder, lift, BaseMatrix};
use protomap::signaling::{bmd_limit_snr_db, reliability_ordering, Signaling};
use protomap::util::db_to_linear;
use rand::seq::SliceRandom;
use rand::Rng;

fn gf2_rank(mut m: Vec<u16>) -> usize {
    let mut rank = 0;
    for bit in 0..16 {
        let Some(p) = (rank..m.len()).find(|&r| m[r] >> bit & 1 == 1) else {
            continue;
        };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && m[r] >> bit & 1 == 1 {
                m[r] ^= m[rank];
            }
        }
        rank += 1;
    }
    rank
}

fn build_surrogate(n6: usize, seed: u64, lifting: usize) -> BaseMatrix {
    let rows = 12usize;
    let cols = 69usize;
    let mut rng = protomap::util::stream_rng(seed, 0x5a5a);
    'outer: loop {
        let mut entries = vec![vec![0u32; cols]; rows];
        for j in 0..12 {
            entries[j][0] = 1;
        }
        for j in 0..11 {
            entries[j][1] = 1;
        }
        // parity columns 2..11 (degree 3), shortened column 12 (degree 6),
        // then the 56 information columns with a shuffled degree profile
        let mut degrees: Vec<(usize, u32)> = (2..12).map(|c| (c, 3)).collect();
        degrees.push((12, 6));
        let mut info_degs = vec![6u32; n6];
        info_degs.extend(vec![3u32; 56 - n6]);
        info_degs.shuffle(&mut rng);
        degrees.extend((13..69).zip(info_degs));
        for (col, deg) in degrees {
            // least-loaded rows with random tie-break
            let mut loads: Vec<(u32, u64, usize)> = (0..rows)
                .map(|j| {
                    let load: u32 = (0..cols).map(|i| entries[j][i]).sum();
                    (load, rng.gen::<u64>(), j)
                })
                .collect();
            loads.sort();
            for &(_, _, j) in loads.iter().take(deg as usize) {
                entries[j][col] = 1;
            }
        }
        // block-level parity check: the mod-2 pattern of the designated
        // parity columns must be nonsingular or no shift choice can make
        // the lifted parity submatrix invertible
        let parity_cols: Vec<usize> = (0..12).collect();
        let d: Vec<u16> = (0..rows)
            .map(|j| {
                parity_cols
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| ((entries[j][c] % 2) as u16) << k)
                    .sum()
            })
            .collect();
        if gf2_rank(d) < 12 {
            continue 'outer;
        }
        return BaseMatrix::new(entries, lifting, [0, 1], [12]).unwrap();
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n6: usize = args.get(1).map_or(24, |s| s.parse().unwrap());
    let seed: u64 = args.get(2).map_or(1, |s| s.parse().unwrap());
    let full: bool = args.get(3).map_or(false, |s| s == "full");
    println!("=== candidate n6={n6} seed={seed} ===");

    let base = build_surrogate(n6, seed, 256);
    println!(
        "rows degrees: {:?}",
        (0..12).map(|j| base.row_degree(j)).collect::<Vec<_>>()
    );

    // encodability + girth at both lifting factors
    for z in [256usize, 64] {
        let b = build_surrogate(n6, seed, z);
        let t0 = Instant::now();
        let code = lift(&b, seed).unwrap();
        match build_encoder(&code, &b) {
            Ok(enc) => println!(
                "z={z}: n={} k={} rate={:.4} lift+enc {:?}",
                code.num_cols(),
                enc.information_length(),
                enc.information_length() as f64 / code.n_transmitted() as f64,
                t0.elapsed()
            ),
            Err(e) => {
                println!("z={z}: ENCODER FAILED: {e}");
                return;
            }
        }
        let t0 = Instant::now();
        let g = code.girth();
        println!("z={z}: girth {:?} in {:?}", g, t0.elapsed());
    }

    let n_sym = 16896 / 4;
    let uni = Signaling::uniform_ask(3);
    let pas = Signaling::pas_ask_for_rate(4, 2.152, n_sym as u64).unwrap();
    let lim_uni = bmd_limit_snr_db(&uni, 2.545, (10.0, 25.0));
    let lim_pas = bmd_limit_snr_db(&pas, 2.545, (10.0, 25.0));
    println!("BMD limits: uniform {lim_uni:.3} dB, pas {lim_pas:.3} dB");

    let ids = base.transmitted_columns();
    let parity: BTreeSet<usize> = base.transmitted_parity_types().into_iter().collect();
    let ref_uni = reference_mapping(3, 66, MappingMode::Uniform, [], ids.clone()).unwrap();
    let ref_pas =
        reference_mapping(4, 66, MappingMode::Pas, parity.iter().cloned(), ids.clone()).unwrap();

    let popts = PexitOptions {
        window_db: (lim_uni - 0.2, lim_uni + 4.0),
        ..Default::default()
    };
    let t0 = Instant::now();
    let th_ref_uni = pexit_threshold(&base, &ref_uni, &uni, &popts).unwrap();
    println!(
        "pexit ref uniform: {th_ref_uni:.3} dB (gap {:.3}) in {:?}",
        th_ref_uni - lim_uni,
        t0.elapsed()
    );
    let popts_pas = PexitOptions {
        window_db: (lim_pas - 0.2, lim_pas + 4.0),
        ..Default::default()
    };
    let t0 = Instant::now();
    let th_ref_pas = pexit_threshold(&base, &ref_pas, &pas, &popts_pas).unwrap();
    println!(
        "pexit ref pas: {th_ref_pas:.3} dB (gap {:.3}) in {:?}",
        th_ref_pas - lim_pas,
        t0.elapsed()
    );

    // successive optimization with the P-EXIT objective
    let sopts = SuccessiveOptions {
        search: PatternSearchOptions {
            initial_step: 0.25,
            step_tolerance: 0.01,
            parallel: true,
            max_iterations: 200,
        },
    };
    let order_uni = reliability_ordering(&uni, db_to_linear(th_ref_uni));
    println!("uniform reliability order: {order_uni:?}");
    let t0 = Instant::now();
    let obj_uni = |m: &BitMapping| {
        let o = PexitOptions {
            window_db: (th_ref_uni - 2.0, th_ref_uni + 0.5),
            tol_db: 0.001,
            ..Default::default()
        };
        pexit_threshold(&base, m, &uni, &o).unwrap_or(f64::INFINITY)
    };
    let (opt_uni, trace) =
        optimize_successive(3, MappingMode::Uniform, &BTreeSet::new(), &ids, &order_uni, obj_uni, &sopts)
            .unwrap();
    for r in &trace.records {
        println!(
            "  uni level {}: {:.3} -> {:.3} ({} polls)",
            r.level, r.initial_objective, r.final_objective, r.polls
        );
    }
    let th_opt_uni = pexit_threshold(&base, &opt_uni, &uni, &popts).unwrap();
    println!(
        "pexit opt uniform: {th_opt_uni:.3} dB, gain {:.3} dB, in {:?}",
        th_ref_uni - th_opt_uni,
        t0.elapsed()
    );

    let order_pas = reliability_ordering(&pas, db_to_linear(th_ref_pas));
    println!("pas reliability order: {order_pas:?}");
    let t0 = Instant::now();
    let obj_pas = |m: &BitMapping| {
        let o = PexitOptions {
            window_db: (th_ref_pas - 2.0, th_ref_pas + 0.5),
            tol_db: 0.001,
            ..Default::default()
        };
        pexit_threshold(&base, m, &pas, &o).unwrap_or(f64::INFINITY)
    };
    let (opt_pas, trace) =
        optimize_successive(4, MappingMode::Pas, &parity, &ids, &order_pas, obj_pas, &sopts)
            .unwrap();
    for r in &trace.records {
        println!(
            "  pas level {}: {:.3} -> {:.3} ({} polls)",
            r.level, r.initial_objective, r.final_objective, r.polls
        );
    }
    let th_opt_pas = pexit_threshold(&base, &opt_pas, &pas, &popts_pas).unwrap();
    println!(
        "pexit opt pas: {th_opt_pas:.3} dB, gain {:.3} dB, in {:?}",
        th_ref_pas - th_opt_pas,
        t0.elapsed()
    );

    // where did level 1 mass go (uniform)? report deg-6 concentration
    let deg6: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, &col)| base.column_degree(col) == 6)
        .map(|(t, _)| t)
        .collect();
    let lvl = order_uni[0] - 1;
    let mass6: f64 = deg6.iter().map(|&t| opt_uni.entry(lvl, t)).sum();
    let total: f64 = (0..66).map(|t| opt_uni.entry(lvl, t)).sum();
    println!(
        "uniform: most reliable level {} mass on deg-6 types: {:.2} of {:.2} ({} deg-6 cols)",
        order_uni[0],
        mass6,
        total,
        deg6.len()
    );
    let lvlp = order_pas[0] - 1;
    let mass6p: f64 = deg6.iter().map(|&t| opt_pas.entry(lvlp, t)).sum();
    let totalp: f64 = (0..66).map(|t| opt_pas.entry(lvlp, t)).sum();
    println!(
        "pas: most reliable level {} mass on deg-6 types: {:.2} of {:.2}",
        order_pas[0], mass6p, totalp
    );

    let _ = std::fs::create_dir_all("/root/scratch");
    opt_uni.save("/root/scratch/opt_uni.csv").unwrap();
    opt_pas.save("/root/scratch/opt_pas.csv").unwrap();
    std::fs::write("/root/scratch/surrogate_z256.bm", base.to_file_string()).unwrap();

    if !full {
        return;
    }

    // DDE validation at q=255, B=15
    let spec8 = protomap::quantize::QuantizerSpec::new(8, 15.0).unwrap();
    let dde_opts = |w: (f64, f64)| ThresholdOptions {
        window_db: w,
        tol_db: 0.01,
        params: DdeParams::default(),
    };
    for (name, mapping, sig, lim) in [
        ("uni ref", &ref_uni, &uni, lim_uni),
        ("uni opt", &opt_uni, &uni, lim_uni),
        ("pas ref", &ref_pas, &pas, lim_pas),
        ("pas opt", &opt_pas, &pas, lim_pas),
    ] {
        let t0 = Instant::now();
        let r = dde::threshold(&base, mapping, sig, &spec8, &dde_opts((lim - 0.1, lim + 3.0)))
            .unwrap();
        println!(
            "dde b8B15 {name}: {:.3} dB ({} probes, {:?})",
            r.threshold_db,
            r.probes.len(),
            t0.elapsed()
        );
    }

    // quantization losses on pas opt
    for (b, clip) in [(4u32, 8.0), (3, 6.0)] {
        let spec = protomap::quantize::QuantizerSpec::new(b, clip).unwrap();
        let t0 = Instant::now();
        let r = dde::threshold(
            &base,
            &opt_pas,
            &pas,
            &spec,
            &dde_opts((lim_pas - 0.1, lim_pas + 6.0)),
        )
        .unwrap();
        println!(
            "dde b{b}B{clip} pas opt: {:.3} dB in {:?}",
            r.threshold_db,
            t0.elapsed()
        );
    }

    // clipping sweeps
    for b in [3u32, 4] {
        let grid: Vec<f64> = (4..=16).map(|x| x as f64).collect();
        let t0 = Instant::now();
        let (points, argmin) = dde::clipping_sweep(
            &base,
            &opt_pas,
            &pas,
            b,
            &grid,
            &dde_opts((lim_pas - 0.1, lim_pas + 8.0)),
        )
        .unwrap();
        println!("sweep b={b}: argmin B={argmin} in {:?}", t0.elapsed());
        for (clip, th) in points {
            println!("  B={clip}: {th:.3} dB");
        }
    }
}
