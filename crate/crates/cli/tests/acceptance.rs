//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//!
//! Lines go straight to the stderr handle so they show up without `--nocapture`.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use sppt::criteria::{
    battery_summary, classify_2x5_sppt, criterion_battery_2xd, is_edge_state, rank4_analysis,
    sigma_from_blocks, Conclusion, RANK_TOL,
};
use sppt::decomposition::{separable_decomposition_ssppt, verify_decomposition};
use sppt::linalg::{
    c, frobenius, kron_vec, min_eigenvalue, numeric_rank, psd_range, subspace_residual,
};
use sppt::product::{chordal_distance, product_vector_factorize, product_vectors_in_range_2xd};
use sppt::random::{gaussian_matrix, gaussian_vector, rng};
use sppt::sppt::{
    applicable_tests, sppt_bipartite, ssppt_bipartite, ssppt_multipartite, ssppt_yuzhao,
};
use sppt::states::*;
use sppt::{
    canonical_factor, is_ppt, linear_index, multi_index, partial_transpose, CMatrix, CVector,
    DensityMatrix, StructuredFactor, TwoByDBlocks,
};
use tempfile::TempDir;

/// `ρ^{T₁}` minimum eigenvalue of the Yu–Zhao state, frozen from an independent numpy eigensolve.
const YUZHAO_PT_MIN: f64 = -0.5;

const SSPPT_PROFILES: [&[usize]; 6] = [
    &[2, 2],
    &[2, 3],
    &[2, 2, 2],
    &[2, 2, 3],
    &[3, 3, 2],
    &[2, 2, 2, 2],
];

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn report(n: usize, title: &str, o: &Outcome) {
    let tag = if o.ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[{tag}] criterion {n:>2}: {title} ({})",
        o.detail
    );
}

fn pt1_min(rho: &DensityMatrix) -> f64 {
    min_eigenvalue(&partial_transpose(rho.matrix(), rho.dims(), &[0]).unwrap())
}

fn yuzhao() -> Outcome {
    let g = yuzhao_counterexample().unwrap();
    let v = ssppt_yuzhao(g.factor.as_ref().unwrap(), 1e-10).unwrap();
    let residual = v.max_residual.unwrap_or(f64::INFINITY);
    let ppt = is_ppt(&g.rho, 1e-9).unwrap();
    let m = pt1_min(&g.rho);
    check(
        v.holds
            && residual <= 1e-10
            && !ppt.is_ppt
            && m <= -0.1
            && (m - YUZHAO_PT_MIN).abs() <= 1e-12,
        format!("legacy residual {residual:.1e}, λ_min(ρ^T1) = {m:.6}"),
    )
}

fn ha() -> Outcome {
    let g = ha_state(0.5).unwrap();
    let f = g.factor.as_ref().unwrap();
    let sppt = sppt_bipartite(f, 1e-8).unwrap();
    let ssppt = ssppt_bipartite(f, 1e-8).unwrap();
    let ppt = is_ppt(&g.rho, 1e-9).unwrap();
    let sigma = sigma_from_blocks(&TwoByDBlocks::from_factor(f).unwrap()).unwrap();
    let pt = partial_transpose(sigma.matrix(), &[2, 5], &[0]).unwrap();
    let birank = (
        numeric_rank(sigma.matrix(), RANK_TOL),
        numeric_rank(&pt, RANK_TOL),
    );
    let edge = is_edge_state(&sigma, 1e-8).unwrap();
    let class = classify_2x5_sppt(f, 1e-8).unwrap();
    let exceptional = class.result.conclusion == Conclusion::Undetermined
        && class.rank_x1 == Some(4)
        && class.birank == Some((5, 5))
        && class.edge.as_ref().and_then(|e| e.edge) == Some(true);

    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/tests/golden/ha_sigma_b0.5.json"
    ))
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let golden = CMatrix::from_fn(10, 10, |i, j| {
        let z = &v["sigma"][i][j];
        c(z[0].as_f64().unwrap(), z[1].as_f64().unwrap())
    });
    let golden_err = frobenius(&(sigma.matrix() - golden));

    let residual = sppt.max_residual.unwrap_or(f64::INFINITY);
    check(
        sppt.holds
            && residual <= 1e-8
            && !ssppt.holds
            && ppt.is_ppt
            && birank == (5, 5)
            && edge.conclusion == Conclusion::Entangled
            && exceptional
            && golden_err <= 1e-12,
        format!(
            "SPPT residual {residual:.1e}, SSPPT residual {:.3}, birank {birank:?}, edge {}, golden σ error {golden_err:.1e}",
            ssppt.max_residual.unwrap_or(f64::NAN),
            edge.conclusion
        ),
    )
}

fn ssppt_sample() -> Vec<GeneratedState> {
    (0..200u64)
        .map(|i| random_ssppt(SSPPT_PROFILES[i as usize % SSPPT_PROFILES.len()], 1000 + i).unwrap())
        .collect()
}

fn constructive(states: &[GeneratedState]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut rows = 0usize;
    for (i, g) in states.iter().enumerate() {
        let f = canonical_factor(&g.rho, 1e-9).unwrap();
        if !ssppt_multipartite(&f, 1e-8).unwrap().holds {
            failures.push(format!("#{i} not SSPPT"));
            continue;
        }
        let dec = separable_decomposition_ssppt(&f, 1e-8).unwrap();
        let chk = verify_decomposition(&dec, &g.rho, 1e-8);
        worst = worst.max(chk.reconstruction_residual);
        if !chk.passes {
            failures.push(format!("#{i} residual {:.1e}", chk.reconstruction_residual));
        }
        for t in &dec.terms {
            rows += 1;
            let pf = product_vector_factorize(&t.ket(), g.rho.dims(), 1e-8).unwrap();
            if !pf.is_product || pf.residual > 1e-8 {
                failures.push(format!(
                    "#{i} term not a product (ratio {:.1e})",
                    pf.schmidt_ratio
                ));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} states, {rows} product rows, worst residual {worst:.1e}{}",
            states.len(),
            summary(&failures)
        ),
    )
}

fn summary(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!(
            "; failures: {}",
            failures
                .iter()
                .take(5)
                .cloned()
                .collect::<Vec<_>>()
                .join(", ")
        )
    }
}

fn canonical_sample() -> Vec<GeneratedState> {
    let mut out = Vec::new();
    for i in 0..25u64 {
        out.push(random_canonical_22n(2 + (i as usize % 3), 2000 + i).unwrap());
    }
    let profiles: [&[usize]; 5] = [&[2, 3], &[3, 2], &[2, 2, 2], &[2, 3, 2], &[2, 2, 2, 2]];
    for i in 0..25u64 {
        out.push(random_canonical_multipartite(profiles[i as usize % 5], 3000 + i).unwrap());
    }
    out
}

fn chain(states: &[GeneratedState]) -> Outcome {
    let mut violations = Vec::new();
    let (mut ssppt_count, mut checked) = (0, 0);
    for (i, g) in states.iter().enumerate() {
        let ppt = is_ppt(&g.rho, 1e-9).unwrap().is_ppt;
        let mut factors: Vec<StructuredFactor> = vec![canonical_factor(&g.rho, 1e-9).unwrap()];
        if let Some(f) = &g.factor {
            factors.push(f.clone());
        }
        for f in &factors {
            let tests = applicable_tests(f, 1e-8).unwrap();
            // Tests come in (SPPT, SSPPT) pairs of one definition.
            for pair in tests.chunks(2) {
                let (sppt, ssppt) = (&pair[0], &pair[1]);
                checked += 1;
                if ssppt.holds {
                    ssppt_count += 1;
                }
                if ssppt.holds && !sppt.holds {
                    violations.push(format!("#{i} {}: SSPPT without SPPT", ssppt.definition));
                }
                if sppt.holds && !ppt {
                    violations.push(format!("#{i} {}: SPPT without PPT", sppt.definition));
                }
            }
        }
    }
    check(
        violations.is_empty() && ssppt_count == checked,
        format!(
            "{} states, {checked} definition checks, {ssppt_count} SSPPT, {} violations{}",
            states.len(),
            violations.len(),
            summary(&violations)
        ),
    )
}

fn families() -> Outcome {
    let mut failures = Vec::new();
    let ssppt = |g: &GeneratedState| {
        let f = canonical_factor(&g.rho, 1e-9).unwrap();
        ssppt_multipartite(&f, 1e-8).unwrap().holds
    };
    for (i, dims) in [&[2usize, 3][..], &[3, 2], &[2, 2, 3], &[3, 2, 2]]
        .iter()
        .enumerate()
    {
        let g = random_cq_state(dims, 40 + i as u64).unwrap();
        if !ssppt(&g) {
            failures.push(format!("cq {dims:?}"));
        }
    }
    for n in 2..=4 {
        let g = random_canonical_22n(n, 50 + n as u64).unwrap();
        let rank = numeric_rank(g.rho.matrix(), RANK_TOL);
        if !ssppt(&g) || rank != n {
            failures.push(format!("canonical-22n N={n} rank {rank}"));
        }
    }
    for (i, dims) in [&[2usize, 3][..], &[2, 2, 2], &[3, 2, 4]]
        .iter()
        .enumerate()
    {
        let g = random_canonical_multipartite(dims, 60 + i as u64).unwrap();
        let rank = numeric_rank(g.rho.matrix(), RANK_TOL);
        if !ssppt(&g) || rank != *dims.last().unwrap() {
            failures.push(format!("canonical-multipartite {dims:?} rank {rank}"));
        }
    }
    for (i, dims) in [&[2usize, 2][..], &[2, 3, 2], &[3, 2, 2, 2]]
        .iter()
        .enumerate()
    {
        let g = random_pure_product(dims, 70 + i as u64).unwrap();
        if !ssppt_multipartite(g.factor.as_ref().unwrap(), 1e-8)
            .unwrap()
            .holds
        {
            failures.push(format!("pure product {dims:?}"));
        }
    }
    let entangled = [bell().unwrap(), ghz(3).unwrap(), ghz(4).unwrap()];
    for g in &entangled {
        if is_ppt(&g.rho, 1e-9).unwrap().is_ppt {
            failures.push(format!("{} is PPT", g.truth.generator));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "CQ, 2⊗2⊗N, multipartite canonical, pure product, Bell/GHZ{}",
            summary(&failures)
        ),
    )
}

fn battery() -> Outcome {
    let mut failures = Vec::new();
    let mut r = rng(77);
    for i in 0..100u64 {
        let d = 3 + (i as usize % 4);
        let kind = if i % 2 == 0 {
            SKind::Contractive
        } else {
            SKind::Normal
        };
        let rank = 1 + (sppt::random::uniform(&mut r, 0.0, d as f64) as usize).min(d - 1);
        let g = random_sppt_2xd(d, kind, rank, 4000 + i).unwrap();
        let blocks = sppt::two_by_d_blocks(&g.rho, 1e-9).unwrap();
        let results = criterion_battery_2xd(&blocks, 1e-8).unwrap();
        let sep = battery_summary(&results).conclusion == Conclusion::Separable;
        let ppt = is_ppt(&g.rho, 1e-9).unwrap().is_ppt;
        if !sep || !ppt {
            failures.push(format!(
                "#{i} d={d} {kind} rank {rank}: separable {sep}, PPT {ppt}"
            ));
        }
    }
    let mut fired = 0;
    for i in 0..20u64 {
        let g = random_a_greater_d(2 + (i as usize % 5), 5000 + i).unwrap();
        let blocks = sppt::two_by_d_blocks(&g.rho, 1e-9).unwrap();
        let results = criterion_battery_2xd(&blocks, 1e-8).unwrap();
        let ad = results
            .iter()
            .find(|r| r.criterion == "a-greater-than-d")
            .unwrap();
        if ad.is_separable() {
            fired += 1;
        } else {
            failures.push(format!("A>D #{i}: {}", ad.evidence));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "100 SPPT 2⊗d states separable and PPT, A>D fired {fired}/20{}",
            summary(&failures)
        ),
    )
}

fn product_search() -> Outcome {
    let mut r = rng(99);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let d = 2 + trial % 5;
        let k = 1 + trial % d;
        let seeds: Vec<(CVector, CVector)> = (0..k)
            .map(|_| (gaussian_vector(&mut r, 2), gaussian_vector(&mut r, d)))
            .collect();
        let basis: Vec<CVector> = seeds.iter().map(|(x, y)| kron_vec(x, y)).collect();
        let search = product_vectors_in_range_2xd(&basis, 1e-8).unwrap();
        for (x, y) in &seeds {
            let t = Some(x[1] / x[0]);
            let target = kron_vec(x, y).normalize();
            let best = search
                .hits
                .iter()
                .map(|h| {
                    let overlap = 1.0 - h.vector().normalize().dotc(&target).norm();
                    (chordal_distance(h.t, t), overlap)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((e, overlap)) if e <= 1e-8 && overlap <= 1e-8 => worst = worst.max(e),
                other => failures.push(format!("trial {trial} d={d} k={k}: {other:?}")),
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "100 trials, worst parameter error {worst:.1e}{}",
            summary(&failures)
        ),
    )
}

fn rank4() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut r = rng(123);
    let mut n = 0;
    let mut seed = 6000;
    while n < 50 {
        seed += 1;
        // Four blocks of a (2,2,2) factor, ranks at most 2 summing to 4.
        let mut ranks = vec![0usize; 4];
        while ranks.iter().sum::<usize>() < 4 {
            let b = (sppt::random::uniform(&mut r, 0.0, 4.0) as usize).min(3);
            if ranks[b] < 2 {
                ranks[b] += 1;
            }
        }
        let g = random_ssppt_with(
            &[2, 2, 2],
            seed,
            &SspptOptions {
                ranks: Some(ranks.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        let range = psd_range(g.rho.matrix(), RANK_TOL);
        if range.ncols() != 4 {
            failures.push(format!("seed {seed} {ranks:?}: rank {}", range.ncols()));
            n += 1;
            continue;
        }
        n += 1;
        let res = rank4_analysis(&g.rho, None, 1e-8).unwrap();
        let Some(v) = res.product_vectors.first() else {
            failures.push(format!("seed {seed} {ranks:?}: {}", res.evidence));
            continue;
        };
        let v = CVector::from_vec(v.clone());
        let membership = subspace_residual(&range, &v);
        let pf = product_vector_factorize(&v, &[2, 2, 2], 1e-8).unwrap();
        worst = worst.max(membership);
        if res.conclusion != Conclusion::Separable || membership > 1e-8 || !pf.is_product {
            failures.push(format!(
                "seed {seed} {ranks:?}: membership {membership:.1e}, product {}",
                pf.is_product
            ));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "50 states, worst membership residual {worst:.1e}{}",
            summary(&failures)
        ),
    )
}

fn algebra() -> Outcome {
    let mut r = rng(5);
    let mut failures = Vec::new();
    let mut cases = 0;
    for d in 1..=4usize {
        for trial in 0..4 {
            let dims: Vec<usize> = (0..d).map(|k| 2 + (k + trial) % 2).collect();
            let n: usize = dims.iter().product();
            let m = gaussian_matrix(&mut r, n, n);
            for mask_i in 0..(1usize << d) {
                let si: Vec<usize> = (0..d).filter(|k| mask_i & (1 << k) != 0).collect();
                let pi = partial_transpose(&m, &dims, &si).unwrap();
                if partial_transpose(&pi, &dims, &si).unwrap() != m {
                    failures.push(format!("involution {dims:?} {si:?}"));
                }
                for mask_j in 0..(1usize << d) {
                    let sj: Vec<usize> = (0..d).filter(|k| mask_j & (1 << k) != 0).collect();
                    let sx: Vec<usize> = (0..d)
                        .filter(|k| (mask_i ^ mask_j) & (1 << k) != 0)
                        .collect();
                    cases += 1;
                    if partial_transpose(&pi, &dims, &sj).unwrap()
                        != partial_transpose(&m, &dims, &sx).unwrap()
                    {
                        failures.push(format!("composition {dims:?} {si:?} {sj:?}"));
                    }
                }
            }
        }
    }
    let profiles: [&[usize]; 12] = [
        &[2],
        &[5],
        &[2, 2],
        &[2, 3],
        &[3, 2],
        &[4, 4],
        &[2, 2, 2],
        &[2, 3, 4],
        &[3, 3, 2],
        &[2, 2, 2, 2],
        &[3, 2, 2, 3],
        &[2, 1, 3],
    ];
    for dims in profiles {
        let total: usize = dims.iter().product();
        for n in 0..total {
            let alpha = multi_index(dims, n).unwrap();
            if linear_index(dims, &alpha).unwrap() != n {
                failures.push(format!("index {dims:?} {n}"));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{cases} composition cases exact, 12 profiles round-trip{}",
            summary(&failures)
        ),
    )
}

fn sppt_bin(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sppt"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let specs: [&[&str]; 4] = [
        &["random-ssppt", "--dims", "2,2,3", "--seed", "7"],
        &[
            "random-sppt-2xd",
            "--d",
            "5",
            "--kind",
            "normal",
            "--rank",
            "4",
            "--seed",
            "3",
        ],
        &["cq", "--dims", "2,2,2", "--seed", "11"],
        &["ha", "--b", "0.5"],
    ];
    let mut failures = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let mut files = Vec::new();
        for run in 0..2 {
            let out = format!("s{i}_{run}.json");
            let mut args = vec!["generate"];
            args.extend_from_slice(spec);
            args.extend_from_slice(&["-o", &out]);
            assert!(sppt_bin(&args, d).status.success());
            files.push(std::fs::read(d.join(&out)).unwrap());
        }
        if files[0] != files[1] {
            failures.push(format!("{} state bytes differ", spec[0]));
        }
        let mut reports = Vec::new();
        for run in 0..2 {
            let json = format!("s{i}.r{run}.json");
            let o = sppt_bin(
                &[
                    "classify",
                    &format!("s{i}_0.json"),
                    "--legacy",
                    "--json",
                    &json,
                ],
                d,
            );
            let mut v: serde_json::Value =
                serde_json::from_slice(&std::fs::read(d.join(&json)).unwrap()).unwrap();
            v.as_object_mut().unwrap().remove("timing_ms");
            reports.push((o.stdout, v));
        }
        if reports[0] != reports[1] {
            failures.push(format!("{} reports differ", spec[0]));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "4 generators, states byte-identical, reports identical{}",
            summary(&failures)
        ),
    )
}

#[test]
fn acceptance() {
    let ssppt = ssppt_sample();
    let mut chain_states = ssppt.clone();
    chain_states.extend(canonical_sample());
    let results = [
        ("Yu–Zhao failure reproduction", yuzhao()),
        ("Ha state at b = 0.5", ha()),
        ("constructive separability", constructive(&ssppt)),
        ("SSPPT ⇒ SPPT ⇒ PPT", chain(&chain_states)),
        ("named-family verdicts", families()),
        ("2⊗d battery soundness", battery()),
        ("product-vector search", product_search()),
        ("rank-4 analysis", rank4()),
        ("core algebra", algebra()),
        ("determinism", determinism()),
    ];
    for (i, (title, o)) in results.iter().enumerate() {
        report(i + 1, title, o);
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
