//! Property tests for the container format: round-trips are bitwise
//! lossless for every form combination, and corrupted inputs always fail
//! cleanly with a typed error.

use proptest::prelude::*;

use seqr_core::adapter::{
    library_from_bytes, library_to_bytes, AdapterLibrary, LibraryBundle,
};
use seqr_core::calibration::CalibrationStats;
use seqr_core::linalg::Matrix;

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, len)
}

#[derive(Debug, Clone, Copy)]
struct FormChoice {
    arrow: bool,
    spectr: bool,
    seqr: bool,
    stats: bool,
    discard_b: bool,
}

fn form_choice() -> impl Strategy<Value = FormChoice> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(arrow, spectr, seqr, stats, discard_b)| FormChoice {
            arrow,
            spectr,
            seqr,
            stats,
            discard_b,
        },
    )
}

fn bundle_strategy() -> impl Strategy<Value = LibraryBundle> {
    (
        2usize..=6,
        2usize..=6,
        1usize..=4,
        any::<bool>(),
        form_choice(),
    )
        .prop_flat_map(|(m, n, count, shared, choice)| {
            let r = m.min(n).min(3);
            (
                Just((m, n, r, shared, choice)),
                entries(r * n),
                prop::collection::vec((entries(m * r), entries(r * n)), count),
            )
        })
        .prop_map(|((m, n, r, shared, choice), a, parts)| {
            let library = if shared {
                AdapterLibrary::new_shared(
                    Matrix::new(r, n, a).unwrap(),
                    parts
                        .iter()
                        .enumerate()
                        .map(|(i, (b, _))| (format!("ad{i}"), Matrix::new(m, r, b.clone()).unwrap()))
                        .collect(),
                )
                .unwrap()
            } else {
                AdapterLibrary::new_unique(
                    parts
                        .iter()
                        .enumerate()
                        .map(|(i, (b, ai))| {
                            (
                                format!("ad{i}"),
                                Matrix::new(m, r, b.clone()).unwrap(),
                                Matrix::new(r, n, ai.clone()).unwrap(),
                            )
                        })
                        .collect(),
                )
                .unwrap()
            };
            let count = library.n_adapters();
            let mut bundle = LibraryBundle::new(library);
            if choice.arrow {
                // Random draws can be degenerate (zero product); arrow forms
                // simply stay absent in that case.
                bundle.forms.arrow = bundle.library.build_arrow_forms().ok();
            }
            if choice.spectr || (choice.discard_b && !shared) {
                bundle.forms.spectr = Some(bundle.library.build_spectr_forms().unwrap());
            }
            if (choice.seqr || choice.discard_b) && shared {
                bundle.forms.seqr = Some(bundle.library.build_seqr_forms().unwrap());
            }
            if choice.stats {
                bundle.stats = Some(CalibrationStats {
                    mu: (0..count).map(|i| i as f64 * 0.5).collect(),
                    sigma: (0..count).map(|i| 1.0 + i as f64 * 0.25).collect(),
                });
            }
            bundle.discard_b = choice.discard_b;
            bundle
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn roundtrip_is_bitwise_lossless(bundle in bundle_strategy()) {
        let bytes = library_to_bytes(&bundle).unwrap();
        let loaded = library_from_bytes(&bytes).unwrap();
        let bytes2 = library_to_bytes(&loaded).unwrap();
        prop_assert_eq!(&bytes, &bytes2);

        // Data-level equality for everything the file stores.
        prop_assert_eq!(loaded.library.n_adapters(), bundle.library.n_adapters());
        prop_assert_eq!(loaded.library.dims(), bundle.library.dims());
        if !bundle.discard_b {
            for i in 0..bundle.library.n_adapters() {
                prop_assert_eq!(
                    loaded.library.adapter(i).b.as_slice(),
                    bundle.library.adapter(i).b.as_slice()
                );
                prop_assert_eq!(&loaded.library.adapter(i).id, &bundle.library.adapter(i).id);
            }
        }
        if let (Some(a), Some(b)) = (loaded.library.shared_a(), bundle.library.shared_a()) {
            prop_assert_eq!(a.as_slice(), b.as_slice());
        }
        if let (Some(sa), Some(sb)) = (&loaded.stats, &bundle.stats) {
            prop_assert_eq!(&sa.mu, &sb.mu);
            prop_assert_eq!(&sa.sigma, &sb.sigma);
        }
    }

    #[test]
    fn single_byte_corruption_never_loads(bundle in bundle_strategy(), pos_seed in any::<u64>(), bit in 0u8..8) {
        let bytes = library_to_bytes(&bundle).unwrap();
        let pos = (pos_seed % bytes.len() as u64) as usize;
        let mut corrupted = bytes.clone();
        corrupted[pos] ^= 1 << bit;
        // Any single-bit flip must surface as a typed error, never a panic
        // or a silently different library.
        prop_assert!(library_from_bytes(&corrupted).is_err());
    }

    #[test]
    fn truncation_never_loads(bundle in bundle_strategy(), cut_seed in any::<u64>()) {
        let bytes = library_to_bytes(&bundle).unwrap();
        let cut = (cut_seed % bytes.len() as u64) as usize;
        prop_assert!(library_from_bytes(&bytes[..cut]).is_err());
    }
}
