//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::{PI, SQRT_2};
use std::process::Command;
use std::time::{Duration, Instant};

use charprob::canonical::{compact_form, null_structure, CanonicalSystem};
use charprob::charsolve::{march, DataSpec, GridSpec, MarchOptions, Mode, Profile, SolutionTrace, TransverseGrid, VariableData};
use charprob::energymon::{balance_residual, verify_estimate};
use charprob::matkit::{rank_and_nullspaces, Matrix};
use charprob::sysmodel::{load_system, side_matrices, Chart, FirstOrderSystem};
use charprob::{check_criteria, reduce, Error, Tolerances, Verdict};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_charprob")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn tmp_file(name: &str, text: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// Reads the matrix printed under `label` by `analyze`.
fn printed_matrix(text: &str, label: &str) -> Matrix<f64> {
    let mut lines = text.lines().skip_while(|l| !l.starts_with(&format!("{label} (")));
    let header = lines.next().unwrap_or_else(|| panic!("no block {label}"));
    let rows: usize = header[label.len() + 2..].split('x').next().unwrap().parse().unwrap();
    let data: Vec<Vec<f64>> = lines
        .take(rows)
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect();
    Matrix::from_rows(&data).unwrap()
}

fn c1_golden() -> Outcome {
    let (code, text, err) = bin(&["analyze", "--example", "wave3d"]);
    ensure(code == 0, || format!("analyze exited {code}: {err}"))?;
    let s = 1.0 / SQRT_2;
    let expected: [(&str, Matrix<f64>); 7] = [
        (
            "B^u",
            Matrix::from_f64_rows(&[&[1.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]),
        ),
        (
            "B^x",
            Matrix::from_f64_rows(&[&[0.0, -1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0, 0.0], &[0.0; 4], &[0.0; 4]]),
        ),
        (
            "S",
            Matrix::from_f64_rows(&[&[s, -s, 0.0, 0.0], &[s, s, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]),
        ),
        ("Nu", Matrix::from_diagonal(&[2.0, 1.0, 1.0])),
        ("Nx", Matrix::from_diagonal(&[-1.0, 0.0, 0.0])),
        (
            "C^y",
            Matrix::from_f64_rows(&[&[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], &[0.0; 4], &[0.0, 1.0, 0.0, 0.0]]).scale(-s),
        ),
        (
            "C^z",
            Matrix::from_f64_rows(&[&[0.0, 0.0, 1.0, 0.0], &[0.0; 4], &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 0.0]]).scale(-s),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (label, want) in &expected {
        let got = printed_matrix(&text, label);
        let d = got.max_abs_diff(want);
        ensure(d <= 1e-12, || format!("{label} differs by {d:e}:\n{got}"))?;
        worst = worst.max(d);
    }
    ensure(text.contains("variables: q2 q3 q4 w1"), || "unexpected variable order".into())?;
    ensure(text.contains("m = 1"), || "m != 1".into())?;
    Ok(format!("7 matrices, max deviation {worst:.1e}, order (q2,q3,q4,w1)"))
}

fn c2_verdict() -> Outcome {
    let (code, text, _) = bin(&["check", "--example", "wave3d"]);
    ensure(code == 0, || format!("wave3d exit {code}"))?;
    ensure(text.contains("verdict: WELL_POSED"), || format!("no WELL_POSED in\n{text}"))?;
    ensure(text.contains("factor(T) = 1"), || "factor not identically 1".into())?;
    let r = printed_matrix(&text, "R");
    ensure(r.max_abs() == 0.0, || format!("R != 0:\n{r}"))?;

    let path = tmp_file("wave_reversed_x.sys", &wave_with_chart(["1 -1 0 0", "0 -1 0 0", "0 0 1 0", "0 0 0 1"]));
    let (code, text, _) = bin(&["check", "--input", &path]);
    ensure(code == 2, || format!("reversed chart exit {code}"))?;
    ensure(text.contains("verdict: NOT_WELL_POSED"), || "reversed chart not rejected".into())?;
    ensure(
        text.contains("criterion ii (Nu > 0, Nx <= 0, Nu + Nx > 0): fails"),
        || format!("criterion ii not reported failing:\n{text}"),
    )?;
    Ok("wave3d WELL_POSED (exit 0, R = 0); reversed x NOT_WELL_POSED (exit 2, criterion ii)".into())
}

fn c3_transversality() -> Outcome {
    let (sys, _) = load_system(charprob::cli::WAVE3D).unwrap();
    let j = Matrix::from_f64_rows(&[&[1.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
    let chart = Chart::new(j, vec![0.0; 4]).unwrap();
    match reduce(&sys, &chart, &Tolerances::default()) {
        Err(Error::NotTransverse { .. }) => {}
        other => return Err(format!("ψ = y accepted: {:?}", other.err())),
    }
    let path = tmp_file("wave_psi_y.sys", &wave_with_chart(["1 -1 0 0", "0 0 1 0", "0 1 0 0", "0 0 0 1"]));
    let (code, _, err) = bin(&["analyze", "--input", &path]);
    ensure(code == 1 && err.contains("not transverse"), || format!("cli: exit {code}, {err}"))?;

    let red = wave_reduction();
    let det = charprob::matkit::determinant(&red.transversality).unwrap();
    ensure((det.abs() - 1.0).abs() <= 1e-12, || format!("|det M| = {det}"))?;
    Ok(format!("ψ = y rejected; shipped chart |det M| = {:.15}", det.abs()))
}

fn wave_grid(nx: usize, cells: [usize; 2], x_total: f64) -> GridSpec<f64> {
    GridSpec::new(x_total, nx, 1.0, cells.iter().map(|&c| TransverseGrid::periodic(c)).collect())
}

fn c4_plane_wave() -> Outcome {
    let red = wave_reduction();
    let c = &red.canonical;
    let w0 = |u: f64| SQRT_2 * u.sin();
    let mut data = DataSpec::zero(3, 1);
    data.w0[0] = VariableData::single(Mode::new(Profile::Sine { amp: SQRT_2, k: 1.0, phase: 0.0 }));
    let grid = wave_grid(128, [16, 16], 2.0 * PI);
    let trace = march(c, &grid, &data, MarchOptions::default()).map_err(|e| e.to_string())?;
    let (mut q_err, mut w_err) = (0.0f64, 0.0f64);
    for s in &trace.slices {
        for j in 0..=s.x_extent() {
            for t in 0..grid.n_transverse() {
                let v = s.point(j, t);
                q_err = q_err.max(max_abs(&v[..3]));
                w_err = w_err.max((v[3] - w0(s.u_level)).abs());
            }
        }
    }
    ensure(q_err <= 1e-12 && w_err <= 1e-12, || format!("max|q̂| = {q_err:e}, max|ŵ - w0| = {w_err:e}"))?;
    Ok(format!("{} slices, max|q̂| = {q_err:.1e}, max|ŵ - w0(u)| = {w_err:.1e}", trace.slices.len()))
}

/// Max difference between a trace and one on a grid refined by `2` in `x`
/// and `u`, at the coarse nodes.
fn coarse_difference(coarse: &SolutionTrace<f64>, fine: &SolutionTrace<f64>) -> f64 {
    let mut d = 0.0f64;
    for s in &coarse.slices {
        let f = &fine.slices[2 * s.level];
        for j in 0..=s.x_extent() {
            for t in 0..coarse.grid.n_transverse() {
                let (a, b) = (s.point(j, t), f.point(2 * j, t));
                d = a.iter().zip(b).fold(d, |m, (x, y)| m.max((x - y).abs()));
            }
        }
    }
    d
}

fn exact_error(red: &charprob::canonical::Reduction<f64>, trace: &SolutionTrace<f64>) -> f64 {
    let beta = manufactured_amplitudes(red);
    let dx = trace.grid.dx();
    let mut e = 0.0f64;
    for s in &trace.slices {
        for j in 0..=s.x_extent() {
            for t in 0..trace.grid.n_transverse() {
                let y = trace.grid.transverse_coords(t)[0];
                let phase = (s.u_level + j as f64 * dx - y).sin();
                for (k, &b) in beta.iter().enumerate() {
                    e = e.max((s.point(j, t)[k] - b * phase).abs());
                }
            }
        }
    }
    e
}

fn c5_self_convergence() -> Outcome {
    let red = wave_reduction();
    let data = manufactured_data(&red);
    let traces: Vec<SolutionTrace<f64>> = [64, 128, 256]
        .iter()
        .map(|&nx| march(&red.canonical, &wave_grid(nx, [16, 4], PI), &data, MarchOptions::default()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let d1 = coarse_difference(&traces[0], &traces[1]);
    let d2 = coarse_difference(&traces[1], &traces[2]);
    let order = (d1 / d2).log2();
    let exact: Vec<String> = traces.iter().map(|t| format!("{:.2e}", exact_error(&red, t))).collect();
    ensure(order >= 0.8, || format!("order {order:.3} (differences {d1:.3e}, {d2:.3e})"))?;
    Ok(format!(
        "observed order {order:.3} from |v64-v128| = {d1:.3e}, |v128-v256| = {d2:.3e}; error vs exact {}",
        exact.join(", ")
    ))
}

const GENERIC_Q0: &str = "sine:amp=1,k=1,phase=0.3,ky=1,sine:amp=0.5,k=2,phase=0,kz=1,gauss:amp=0.8,center=1,width=0.5,ky=1,kz=1";
const GENERIC_W0: &str = "sine:amp=0.7,k=1.5,phase=0.2,ky=2";

struct Row {
    t: f64,
    data: f64,
    margin: f64,
    holds: bool,
}

fn estimate_rows(nx: usize) -> Result<Vec<Row>, String> {
    let nx_s = nx.to_string();
    let (code, text, err) = bin(&[
        "verify-estimate", "--example", "wave3d", "--nx", &nx_s, "--cells", "8", "--q0", GENERIC_Q0, "--w0", GENERIC_W0,
    ]);
    ensure(code == 0, || format!("verify-estimate exit {code}: {err}"))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            let f = |i: usize| r[i].parse::<f64>().map_err(|e| e.to_string());
            Ok(Row {
                t: f(0)?,
                data: f(1)? + f(2)?,
                margin: f(5)?,
                holds: &r[7] == "true",
            })
        })
        .collect()
}

fn c6_estimate() -> Outcome {
    let coarse = estimate_rows(64)?;
    let fine = estimate_rows(128)?;
    ensure(coarse.len() == 8 && fine.len() == 8, || "ladder does not have 8 levels".into())?;
    for r in coarse.iter().chain(&fine) {
        ensure(r.holds, || format!("estimate fails at T = {}: margin {:e}", r.t, r.margin))?;
    }
    let neg = |rows: &[Row]| rows.iter().fold(0.0f64, |m, r| m.max(-r.margin));
    let (nc, nf) = (neg(&coarse), neg(&fine));
    ensure(nf <= nc / 1.5, || format!("worst negative margin {nc:e} -> {nf:e}"))?;
    let rel = |rows: &[Row]| rows.iter().map(|r| r.margin / r.data).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "16 levels hold; worst negative margin {nc:.2e} -> {nf:.2e}; min margin/data {:.3e} -> {:.3e}",
        rel(&coarse),
        rel(&fine)
    ))
}

fn damped_wave() -> CanonicalSystem<f64> {
    let minus_i = Matrix::identity(4).scale(-1.0);
    wave_reduction()
        .canonical
        .with_lower_order(minus_i.select_rows(&[0, 1, 2]), minus_i.select_rows(&[3]))
        .unwrap()
}

fn generic_data() -> DataSpec<f64> {
    DataSpec {
        q0: charprob::parse_presets(GENERIC_Q0).unwrap(),
        w0: charprob::parse_presets(GENERIC_W0).unwrap(),
    }
}

fn c7_exponential() -> Outcome {
    let c = damped_wave();
    let cf = compact_form(&c);
    let tol = Tolerances::default();
    let report = check_criteria(&cf, &tol);
    ensure(report.verdict == Verdict::WellPosed, || format!("verdict {}", report.verdict))?;
    let r_err = cf.r.max_abs_diff(&Matrix::identity(4).scale(-2.0));
    ensure(r_err < 1e-12, || format!("R != -2I (off by {r_err:e})"))?;
    let t_max = report.t_max.ok_or("no finite T_max")?;
    ensure((report.r - 2.0).abs() < 1e-12 && (report.c - 1.0).abs() < 1e-12, || format!("r = {}, c = {}", report.r, report.c))?;
    let grid = wave_grid(64, [8, 8], 1.0);
    let trace = march(&c, &grid, &generic_data(), MarchOptions::default()).map_err(|e| e.to_string())?;
    let t = 0.5 * t_max;
    let e = verify_estimate(&trace, &cf, &report, t, 10.0).map_err(|e| e.to_string())?;
    let factor = (report.r / report.c * e.t).exp();
    ensure((e.bound - factor * (e.norm_q0_sq + e.norm_w0_sq)).abs() <= 1e-12 * e.bound, || "bound does not use e^{(r/c)T}".into())?;
    ensure(e.holds, || format!("estimate fails: margin {:e}, tol_h {:e}", e.margin, e.tol_h))?;
    let refused = verify_estimate(&trace, &cf, &report, t_max, 10.0);
    match &refused {
        Err(err @ Error::BeyondHorizon { .. }) if err.to_string().contains("c/r") => {}
        other => return Err(format!("T = T_max not refused: {other:?}")),
    }
    Ok(format!(
        "T = {:.3}, sigma {:.4e} <= e^{{2T}}·data = {:.4e}; T = T_max refused",
        e.t, e.sigma_norm_sq, e.bound
    ))
}

fn c8_balance() -> Outcome {
    let red = wave_reduction();
    let data = generic_data();
    let t = PI / 2.0;
    let mut res = Vec::new();
    for nx in [32, 64, 128, 256] {
        let trace = march(&red.canonical, &wave_grid(nx, [8, 8], PI), &data, MarchOptions::default()).map_err(|e| e.to_string())?;
        res.push(balance_residual(&trace, &red.compact, t).map_err(|e| e.to_string())?);
    }
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let res_s: Vec<String> = res.iter().map(|r| format!("{r:.3e}")).collect();
    let ord_s: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    let detail = format!("T = π/2, nx 32..256: residuals {}; orders {}", res_s.join(", "), ord_s.join(", "));
    ensure(orders.iter().all(|&o| o >= 0.8), || detail.clone())?;
    Ok(detail)
}

fn random_data(rng: &mut ChaCha8Rng) -> DataSpec<f64> {
    let var = |rng: &mut ChaCha8Rng| {
        VariableData::single(
            Mode::new(Profile::Sine {
                amp: rng.gen_range(-1.0..1.0),
                k: rng.gen_range(0.0..3.0),
                phase: rng.gen_range(0.0..6.0),
            })
            .with_wavenumbers(&[rng.gen_range(-2..=2), rng.gen_range(-2..=2)]),
        )
    };
    DataSpec {
        q0: (0..3).map(|_| var(rng)).collect(),
        w0: vec![var(rng)],
    }
}

fn c9_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let red = wave_reduction();
    let c = &red.canonical;
    let opts = MarchOptions::default();

    // linearity, zero data, determinism on small grids
    for _ in 0..5 {
        let nx = rng.gen_range(8..20);
        let grid = wave_grid(nx, [4, rng.gen_range(4..7)], rng.gen_range(1.0..4.0));
        let (d1, d2) = (random_data(&mut rng), random_data(&mut rng));
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let t1 = march(c, &grid, &d1, opts).unwrap();
        let t2 = march(c, &grid, &d2, opts).unwrap();
        let t12 = march(c, &grid, &d1.combine(a, &d2, b), opts).unwrap();
        let mut dev = 0.0f64;
        for ((s1, s2), s12) in t1.slices.iter().zip(&t2.slices).zip(&t12.slices) {
            for ((x, y), z) in s1.values().iter().zip(s2.values()).zip(s12.values()) {
                dev = dev.max((a * x + b * y - z).abs());
            }
        }
        ensure(dev <= 1e-12, || format!("linearity deviation {dev:e}"))?;
        let again = march(c, &grid, &d1, opts).unwrap();
        ensure(again == t1, || "rerun not bit-identical".into())?;
        let zero = march(c, &grid, &DataSpec::zero(3, 1), opts).unwrap();
        ensure(zero.slices.iter().all(|s| s.values().iter().all(|&v| v == 0.0)), || "zero data gave non-zero".into())?;
    }

    // rank identity, null residuals, S orthogonality on random systems
    let tol = Tolerances::default();
    let mut characteristic = 0;
    for _ in 0..100 {
        let r = rng.gen_range(1..=4);
        let at = planted_rank(&mut rng, 4, r);
        let oracle = exact_rank(&at);
        let mut a = vec![to_matrix(&at)];
        for _ in 0..3 {
            let rows: Vec<Vec<i64>> = (0..4).map(|_| (0..4).map(|_| rng.gen_range(-3..=3)).collect()).collect();
            a.push(to_matrix(&rows));
        }
        let names = ["t", "x", "y", "z"].map(String::from).to_vec();
        let sys = FirstOrderSystem::new(names, a, Matrix::zeros(4, 4)).unwrap();
        let sides = side_matrices(&sys, &Chart::identity(4)).unwrap();
        let ns = rank_and_nullspaces(sides.bu(), tol.rank).unwrap();
        ensure(ns.rank == oracle, || format!("rank {} vs exact {oracle}", ns.rank))?;
        ensure(ns.right.len() + ns.rank == 4, || "m + rank(B^u) != 4".into())?;
        let scale = sides.bu().norm().max(1.0);
        for z in &ns.right {
            let res = max_abs(&sides.bu().mul_vec(z));
            ensure(res <= 1e-10 * scale, || format!("right null residual {res:e}"))?;
        }
        for z in &ns.left {
            let res = max_abs(&sides.bu().left_mul_vec(z));
            ensure(res <= 1e-10 * scale, || format!("left null residual {res:e}"))?;
        }
        if ns.rank < 4 {
            characteristic += 1;
            let cs = null_structure(&sides, sys.lower_order(), &tol).unwrap();
            let dev = (&cs.s * &cs.s.transpose()).max_abs_diff(&Matrix::identity(4));
            ensure(dev <= 1e-12, || format!("S Sᵀ - I = {dev:e}"))?;
        }
    }
    Ok(format!(
        "linearity/zero/determinism on 5 random grids; rank identity and null residuals on 100 systems ({characteristic} characteristic, S orthogonal)"
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "golden canonicalization", limit: Some(Duration::from_secs(1)), run: c1_golden },
        Criterion { id: 2, name: "well-posedness verdicts", limit: Some(Duration::from_secs(1)), run: c2_verdict },
        Criterion { id: 3, name: "transversality", limit: Some(Duration::from_secs(1)), run: c3_transversality },
        Criterion { id: 4, name: "exact plane-wave march", limit: Some(Duration::from_secs(10)), run: c4_plane_wave },
        Criterion { id: 5, name: "self-convergence", limit: Some(Duration::from_secs(60)), run: c5_self_convergence },
        Criterion { id: 6, name: "energy estimate, R = 0", limit: Some(Duration::from_secs(60)), run: c6_estimate },
        Criterion { id: 7, name: "energy estimate, exponential branch", limit: Some(Duration::from_secs(60)), run: c7_exponential },
        Criterion { id: 8, name: "energy balance", limit: None, run: c8_balance },
        Criterion { id: 9, name: "property suite", limit: None, run: c9_properties },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {:.2} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs())),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} {} ({:.2} s): {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
