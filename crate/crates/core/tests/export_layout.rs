//! Dumps and manifest written by numpy in the exporter's layout load through
//! the data layer with the right shapes, labels and values.

use std::path::PathBuf;

use augprobe::data::{DatasetManifest, Domain, Dtype, LayerTag};

const ROWS: usize = 10;

fn manifest() -> DatasetManifest {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/export_toy/manifest.json");
    DatasetManifest::load(&path).unwrap()
}

// Same formula as make_export_fixture.py.
fn expected(domain: usize, i: usize, j: usize) -> f64 {
    ((i * 5 + j * 3 + domain * 7) % 23) as f64 / 8.0 - 11.0 / 8.0
}

#[test]
fn manifest_validates_and_lists_both_layers() {
    let m = manifest();
    m.validate().unwrap();
    assert_eq!(m.class_count, 3);
    assert_eq!(m.dtype, Dtype::F4);
    let tags: Vec<_> = m.layers.iter().map(|l| l.layer.clone()).collect();
    assert_eq!(tags, [LayerTag::Penultimate, LayerTag::Antepenultimate]);
}

#[test]
fn float32_dumps_upcast_exactly() {
    let m = manifest();
    for (tag, width) in [(LayerTag::Penultimate, 4), (LayerTag::Antepenultimate, 6)] {
        for (d, domain) in [Domain::Clean, Domain::Aug].into_iter().enumerate() {
            let ds = m.load_dataset(&tag, domain).unwrap();
            assert_eq!((ds.len(), ds.dims()), (ROWS, width), "{tag} {domain:?}");
            assert!(ds.domain_ids().iter().all(|&x| x == domain));
            assert_eq!(ds.layer_tag(), &tag);
            for i in 0..ROWS {
                for j in 0..width {
                    assert_eq!(ds.features().get(i, j), expected(d, i, j), "{tag} {domain:?} ({i}, {j})");
                }
            }
        }
    }
}

#[test]
fn labels_align_by_row() {
    let m = manifest();
    for tag in [LayerTag::Penultimate, LayerTag::Antepenultimate] {
        assert!(m.has_labels(&tag).unwrap());
        for domain in [Domain::Clean, Domain::Aug] {
            let ds = m.load_dataset(&tag, domain).unwrap();
            let want: Vec<usize> = (0..ROWS).map(|i| i % 3).collect();
            assert_eq!(ds.class_labels(), want.as_slice());
        }
    }
}
