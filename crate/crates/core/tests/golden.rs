use std::path::Path;

use volterra_tv::harness::{make_phantom, scenarios};
use volterra_tv::io::read_signal;
use volterra_tv::{Grid, Kernel, VolterraOperator};

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn exponential_forward_data() {
    let cfg = scenarios::exponential_figure();
    let g = Grid::new(cfg.horizon, cfg.n).unwrap();
    let op = VolterraOperator::discretize(&Kernel::parse(&cfg.kernel).unwrap(), g).unwrap();
    let f = op.apply(&make_phantom(&cfg.phantom, g).unwrap()).unwrap();
    let golden = read_signal(&data("exponential_forward.csv")).unwrap();
    assert!(golden.grid().compatible(&g));
    for (a, b) in f.values().iter().zip(golden.values()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn abel_three_step_phantom() {
    let cfg = scenarios::abel_three_step();
    let g = Grid::new(cfg.horizon, cfg.n).unwrap();
    let u = make_phantom(&cfg.phantom, g).unwrap();
    let golden = read_signal(&data("abel_three_step_phantom.csv")).unwrap();
    assert_eq!(u.values(), golden.values());
}
