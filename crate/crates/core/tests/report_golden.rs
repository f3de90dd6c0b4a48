//! Rendered tables and figures of the synthetic corpus against committed
//! copies. Regenerate with `UPDATE_GOLDEN=1 cargo test --test report_golden`
//! and review the diff.

mod common;

use std::fs;
use std::path::Path;

use climate_narrative::pipeline::{Pipeline, PipelineConfig};

use common::{read_tree, synthetic_copy};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/synthetic");

#[test]
fn synthetic_report_matches_golden() {
    let (dir, cfg) = synthetic_copy();
    Pipeline::new(PipelineConfig::load(&cfg).unwrap())
        .run_all()
        .unwrap();
    let out = dir.path().join("out");
    let mut rendered = read_tree(&out.join("tables"))
        .into_iter()
        .map(|(k, v)| (format!("tables/{k}"), v))
        .collect::<std::collections::BTreeMap<_, _>>();
    rendered.extend(
        read_tree(&out.join("figures"))
            .into_iter()
            .map(|(k, v)| (format!("figures/{k}"), v)),
    );

    let golden = Path::new(GOLDEN);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        if golden.exists() {
            fs::remove_dir_all(golden).unwrap();
        }
        for (name, bytes) in &rendered {
            let p = golden.join(name);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, bytes).unwrap();
        }
        eprintln!("golden files rewritten under {GOLDEN}");
        return;
    }
    let expected = read_tree(golden);
    let names =
        |m: &std::collections::BTreeMap<String, Vec<u8>>| m.keys().cloned().collect::<Vec<_>>();
    assert_eq!(
        names(&rendered),
        names(&expected),
        "file set differs from golden"
    );
    for (name, bytes) in &rendered {
        assert!(
            bytes == &expected[name],
            "{name} differs from golden:\n{}",
            String::from_utf8_lossy(bytes)
        );
    }
}
