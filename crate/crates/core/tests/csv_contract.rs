//! The sweep CSV is the only interface to the plotting side; pin it down.

use std::collections::BTreeSet;

use qnd_cat::config::{EngineSet, SignChoice, SweepSpec};
use qnd_cat::sweep::{emit_csv, parse_csv, surface_sweep, write_csv, CSV_HEADER};

const HEADER_LINE: &str =
    "n_mean,R,a,sign,mu,d,I_closed,Bmax_closed,thI,thIp,thII,thIIp,I_oracle,Bmax_oracle,herald_prob,status";

fn small_spec() -> SweepSpec {
    SweepSpec {
        n_mean_grid: vec![0.5, 1.0, 3.0],
        r_grid: vec![0.0, 0.05, 0.2],
        a_grid: vec![1.0],
        sign: SignChoice::Both,
        engines: EngineSet {
            closed: true,
            branch: true,
            fock: false,
        },
        fock_policy: Default::default(),
    }
}

fn render(spec: &SweepSpec) -> String {
    let mut buf = Vec::new();
    write_csv(&surface_sweep(spec), &mut buf).unwrap();
    String::from_utf8(buf).expect("utf-8")
}

#[test]
fn header_is_exact_and_empty_input_gives_header_only() {
    assert_eq!(CSV_HEADER.join(","), HEADER_LINE);
    let mut buf = Vec::new();
    write_csv(&[], &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), format!("{HEADER_LINE}\n"));
}

#[test]
fn ideal_point_row() {
    let spec = SweepSpec {
        n_mean_grid: vec![9.0],
        r_grid: vec![0.0],
        sign: SignChoice::Minus,
        ..small_spec()
    };
    let text = render(&spec);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 16);
    assert_eq!(row[6], "1.38629436");
    assert_eq!(row[3], "-");
    assert_eq!(row[15], "ok");
    let b: f64 = row[7].parse().unwrap();
    assert!((b - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-6);
}

#[test]
fn line_endings_and_significant_digits() {
    let text = render(&small_spec());
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 16, "{line}");
        for f in fields.iter().take(15).filter(|f| !f.is_empty() && **f != "+" && **f != "-") {
            let mantissa = f.split(['e', 'E']).next().unwrap();
            let digits = mantissa.trim_start_matches('-').replace('.', "");
            let significant = digits.trim_start_matches('0').len();
            assert!(significant <= 9, "{f} has {significant} significant digits");
        }
    }
}

#[test]
fn round_trip_and_determinism() {
    let spec = small_spec();
    let records = surface_sweep(&spec);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    emit_csv(&records, &path).unwrap();
    let back = parse_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), records.len());
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-8 * x.abs().max(1e-300) + 1e-300,
        (None, None) => true,
        _ => false,
    };
    for (r, b) in records.iter().zip(&back) {
        assert_eq!((r.n_mean, r.r, r.a, r.sign), (b.n_mean, b.r, b.a, b.sign));
        assert!(close(r.i_closed, b.i_closed) && close(r.bmax_closed, b.bmax_closed));
        assert!(close(r.i_oracle, b.i_oracle) && close(r.bmax_oracle, b.bmax_oracle));
        assert!(close(r.mu, b.mu) && close(r.d, b.d) && close(r.herald_prob, b.herald_prob));
        assert_eq!(r.status, b.status);
    }
    // Byte-identical on a second run.
    assert_eq!(std::fs::read_to_string(&path).unwrap(), render(&spec));
}

#[test]
fn grid_is_a_complete_rectangle_in_sorted_order() {
    let spec = small_spec();
    let records = surface_sweep(&spec);
    let keys: Vec<(u64, u64, u64, String)> = records
        .iter()
        .map(|r| (r.n_mean.to_bits(), r.r.to_bits(), r.a.to_bits(), r.sign.symbol().to_string()))
        .collect();
    let unique: BTreeSet<_> = keys.iter().cloned().collect();
    assert_eq!(unique.len(), 3 * 3 * 2);
    assert_eq!(records.len(), unique.len());
    let ordered = records.windows(2).all(|w| {
        let (x, y) = (&w[0], &w[1]);
        (x.n_mean, x.r, x.a).partial_cmp(&(y.n_mean, y.r, y.a)).unwrap().is_le()
    });
    assert!(ordered);
}

#[test]
fn bad_header_is_rejected() {
    let err = parse_csv("n_mean,R\n1,0\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("header"));
}
