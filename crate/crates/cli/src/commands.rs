use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anosov::correlation::{exact_series, fit_decay_with_floor, monte_carlo_series};
use anosov::rng::{self_test, GeneratorState};
use anosov::spectral::spectrum_distribution_csv;
use anosov::timescales::{preset, timescale_report, TimescaleReport};
use anosov::{
    build_family_matrix, compute_spectrum, polynomial_one_step_scan, sawtooth_series,
    smooth_family, CorrelationSeries, IntegerMatrix, Observable, Phase, Term,
};
use serde_json::json;

use crate::args::{
    Cli, Command, CorrelateArgs, FitArgs, Format, MatrixArgs, MethodArg, PresetArg, RngArgs,
    ScanArgs, SelftestArgs, SeriesArgs, SpectrumArgs, StreamFormat, TimescaleArgs,
};
use crate::output::{resolve, sibling, write, Artifact, Header};
use crate::CliError;

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let header = Header {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::to_value(&cli.command).expect("config serializes"),
        seed: seed_of(&cli.command),
        workers: rayon::current_num_threads(),
    };
    let out = cli.output.as_deref().map(resolve);
    let out = out.as_deref();
    match &cli.command {
        Command::Matrix(a) => matrix(a, &header, out),
        Command::Spectrum(a) => spectrum(a, &header, out),
        Command::Correlate(a) => correlate(a, &header, out),
        Command::ScanD1(a) => scan(a, &header, out),
        Command::FitDecay(a) => fit(a, &header, out),
        Command::Timescales(a) => timescales(a, &header, out),
        Command::Rng(a) => rng(a, &header, out),
        Command::Selftest(a) => selftest(a, &header, out),
    }
}

fn seed_of(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::Correlate(a) => Some(a.series.seed),
        Command::FitDecay(a) => Some(a.series.seed),
        Command::ScanD1(a) => Some(a.seed),
        Command::Rng(a) => Some(a.seed),
        Command::Selftest(a) => Some(a.seed),
        _ => None,
    }
}

fn matrix(a: &MatrixArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let m = build_family_matrix(a.dim)?.pow(a.power);
    let artifact = match a.format {
        Format::Csv => {
            let body: String = m
                .rows()
                .map(|row| row.iter().map(ToString::to_string).collect::<Vec<_>>().join(",") + "\n")
                .collect();
            Artifact::csv(header, &body)
        }
        Format::Json => Artifact::json(
            header,
            json!({
                "N": a.dim,
                "power": a.power,
                "determinant": m.determinant().to_string(),
                "entries": serde_json::to_value(&m).expect("matrix serializes"),
            }),
        ),
    };
    write(artifact, out)
}

fn spectrum(a: &SpectrumArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let m = build_family_matrix(a.dim)?;
    match a.format {
        Format::Csv => {
            let tables = spectrum_distribution_csv(&m, a.inverse)?;
            match (out, tables.inverse) {
                (Some(path), Some(inv)) => {
                    write(Artifact::csv(header, &tables.forward), Some(path))?;
                    write(Artifact::csv(header, &inv), Some(&sibling(path, "inverse")))
                }
                (_, inv) => {
                    let mut body = tables.forward;
                    if let Some(inv) = inv {
                        body.push_str("# inverse\n");
                        body.push_str(&inv);
                    }
                    write(Artifact::csv(header, &body), out)
                }
            }
        }
        Format::Json => {
            let s = compute_spectrum(&m, a.tol)?;
            let mut data = json!({ "spectrum": s });
            if a.inverse {
                let inv: Vec<[f64; 2]> = s
                    .eigenvalues
                    .iter()
                    .rev()
                    .map(|z| {
                        let r = z.inv();
                        [r.re, r.im]
                    })
                    .collect();
                data["inverse_eigenvalues"] = json!(inv);
            }
            write(Artifact::json(header, data), out)
        }
    }
}

/// `smooth:P:CUTOFF`, `sawtooth:COORD:CUTOFF`, `mode:cos|sin:K1,K2,..` or `@file.json`.
fn parse_observable(desc: &str, dim: usize) -> Result<Observable, CliError> {
    let bad = || CliError::usage(format!("cannot parse observable '{desc}'"));
    if let Some(path) = desc.strip_prefix('@') {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(Path::new(path), e))?;
        return Ok(Observable::from_json(&text)?);
    }
    let parts: Vec<&str> = desc.split(':').collect();
    let num = |s: &str| s.parse::<u32>().map_err(|_| bad());
    match parts.as_slice() {
        ["smooth", p, cutoff] => Ok(smooth_family(num(p)?, num(cutoff)?, dim)?),
        ["sawtooth", coord, cutoff] => Ok(sawtooth_series(dim, num(coord)? as usize, num(cutoff)?)?),
        ["mode", phase, freq] => {
            let phase = match *phase {
                "cos" => Phase::Cos,
                "sin" => Phase::Sin,
                _ => return Err(bad()),
            };
            let freq = freq
                .split(',')
                .map(|k| k.trim().parse::<i64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Observable::from_terms(dim, 0.0, vec![Term { freq, phase, amp: 1.0 }])?)
        }
        _ => Err(bad()),
    }
}

fn parse_range(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::usage(format!("invalid range '{s}', expected A:B with A <= B"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

struct SeriesRun {
    m: IntegerMatrix,
    f: Observable,
    g: Observable,
    series: CorrelationSeries,
}

fn run_series(a: &SeriesArgs) -> Result<SeriesRun, CliError> {
    let m = build_family_matrix(a.dim)?;
    let f = parse_observable(&a.f, a.dim)?;
    let g = parse_observable(&a.g, a.dim)?;
    let ns = parse_range(&a.n_range)?;
    let series = match a.method {
        MethodArg::Exact => exact_series(&m, &f, &g, &ns)?,
        MethodArg::Mc => monte_carlo_series(&m, &f, &g, &ns, a.samples, a.seed)?,
    };
    Ok(SeriesRun { m, f, g, series })
}

fn correlate(a: &CorrelateArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let run = run_series(&a.series)?;
    let artifact = match a.format {
        Format::Csv => Artifact::csv(header, &run.series.to_csv()),
        Format::Json => Artifact::json(header, json!(run.series)),
    };
    write(artifact, out)
}

fn fit(a: &FitArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let run = run_series(&a.series)?;
    let spectrum = compute_spectrum(&run.m, anosov::spectral::DEFAULT_UNIT_CIRCLE_TOL)?;
    let fit = fit_decay_with_floor(&run.series, &spectrum, &run.f, &run.g, a.noise_floor)?;
    write(Artifact::json(header, json!({ "fit": fit, "series": run.series })), out)
}

fn scan(a: &ScanArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let scan = polynomial_one_step_scan(a.r_max, a.samples, a.seed)?;
    let artifact = match a.format {
        Format::Csv => {
            let mut body = String::from("r,d1,d1_stderr,k1,k1_stderr,samples\n");
            let (d, k) = (&scan.d1, &scan.k1);
            let (ds, ks) = (d.stderr.as_deref().unwrap_or(&[]), k.stderr.as_deref().unwrap_or(&[]));
            for i in 0..d.len() {
                let _ = writeln!(
                    body,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    d.n_values[i], d.d_values[i], ds[i], k.d_values[i], ks[i], a.samples
                );
            }
            Artifact::csv(header, &body)
        }
        Format::Json => Artifact::json(header, json!(scan)),
    };
    write(artifact, out)
}

fn timescales(a: &TimescaleArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let report = match a.preset {
        Some(p) => {
            let name = match p {
                PresetArg::Mixmax240 => "mixmax240",
                PresetArg::Mixmax256 => "mixmax256",
            };
            TimescaleReport::for_preset(&preset(name).expect("preset exists"), a.p)?
        }
        None => {
            let h = match a.h {
                Some(h) => h,
                None => anosov::entropy(&build_family_matrix(a.dim)?)?,
            };
            TimescaleReport::new(&timescale_report(a.dim, a.p, h, a.log2_inv_dv0)?, None)
        }
    };
    write(Artifact::json(header, json!(report)), out)
}

fn rng(a: &RngArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let mut g = GeneratorState::stream(a.dim, a.seed, a.stream)?;
    let artifact = match a.format {
        StreamFormat::Raw => {
            eprint!("{}", header.comment_lines());
            Artifact::Bytes((0..a.count).flat_map(|_| g.next_raw().to_le_bytes()).collect())
        }
        StreamFormat::Decimal => {
            let mut body = String::with_capacity(a.count as usize * 22);
            for _ in 0..a.count {
                let _ = writeln!(body, "{}", g.next_f64());
            }
            Artifact::csv(header, &body)
        }
    };
    write(artifact, out)
}

fn selftest(a: &SelftestArgs, header: &Header, out: Option<&Path>) -> Result<(), CliError> {
    let report = self_test(a.dim, a.seed, a.samples)?;
    write(Artifact::json(header, json!(report)), out)
}
