use std::path::Path;

use kernseq::plot::{render_svg, ScatterSpec};
use kernseq::Matrix;

// Regenerate with UPDATE_GOLDEN=1 after an intended rendering change.
#[test]
fn five_point_scatter_matches_golden() {
    let pts = Matrix::from_rows(&[
        vec![0.0, 0.0],
        vec![1.5, -2.0],
        vec![-3.25, 4.0],
        vec![2.0, 2.0],
        vec![0.5, 1.0],
    ])
    .unwrap();
    let labels = vec![Some("virus B".into()), Some("virus A".into()), None, Some("virus B".into()), Some("<x>".into())];
    let mut spec = ScatterSpec::new(pts).with_labels(labels);
    spec.title = Some("golden".into());
    let svg = render_svg(&spec).unwrap();

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_scatter.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &svg).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).expect("golden file missing; run with UPDATE_GOLDEN=1");
    assert_eq!(svg, expected);
}
