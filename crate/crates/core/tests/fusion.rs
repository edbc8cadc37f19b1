use edof::acquisition::{gen_synthetic_stack, simulate_low_mag, PsfParams, SynthConfig};
use edof::image::{load_stack, quantize, save_pgm, to_unit, BitDepth, StackManifest, ZStack};
use edof::metrics::{dice, mse, segment_parasite_regions};
use edof::wavelet::{fuse_wavelet, FilterBank};

#[test]
fn fusion_survives_a_disk_round_trip() {
    let (stack, _) = gen_synthetic_stack(&SynthConfig {
        seed: 8,
        height: 48,
        width: 56,
        ..SynthConfig::default()
    })
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (z, p) in stack.planes().iter().enumerate() {
        let path = tmp.path().join(format!("p{z}.pgm"));
        save_pgm(p, BitDepth::Sixteen, &path).unwrap();
        paths.push(path);
    }
    let manifest = tmp.path().join("s.manifest");
    StackManifest::new(stack.z_step(), stack.pixel_pitch(), paths)
        .unwrap()
        .write(&manifest)
        .unwrap();
    let loaded = load_stack(&StackManifest::from_file(&manifest).unwrap()).unwrap();
    let quantized = ZStack::new(
        stack
            .planes()
            .iter()
            .map(|p| to_unit(&quantize(p, BitDepth::Sixteen), p.pixel_pitch()).unwrap())
            .collect(),
        stack.z_step(),
    )
    .unwrap();

    let bank = FilterBank::sym8();
    assert_eq!(
        fuse_wavelet(&loaded, &bank, 12).unwrap(),
        fuse_wavelet(&quantized, &bank, 12).unwrap()
    );
}

#[test]
fn sym8_beats_haar_and_every_single_plane() {
    let (stack, gt) = gen_synthetic_stack(&SynthConfig {
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap();
    let sym8 = mse(&fuse_wavelet(&stack, &FilterBank::sym8(), 12).unwrap(), &gt).unwrap();
    let haar = mse(&fuse_wavelet(&stack, &FilterBank::haar(), 12).unwrap(), &gt).unwrap();
    let best = stack
        .planes()
        .iter()
        .map(|p| mse(p, &gt).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(
        sym8 < best && sym8 < haar,
        "sym8 {sym8} haar {haar} best plane {best}"
    );
}

#[test]
fn fused_segmentation_tracks_ground_truth() {
    let (stack, gt) = gen_synthetic_stack(&SynthConfig {
        seed: 5,
        objects: 16,
        ..SynthConfig::default()
    })
    .unwrap();
    let fused = fuse_wavelet(&stack, &FilterBank::sym8(), 12).unwrap();
    let d = dice(
        &segment_parasite_regions(&fused).unwrap(),
        &segment_parasite_regions(&gt).unwrap(),
    )
    .unwrap();
    assert!(d > 0.8, "dice {d}");
}

#[test]
fn low_magnification_stack_still_fuses() {
    let (stack, _) = gen_synthetic_stack(&SynthConfig {
        seed: 2,
        height: 100,
        width: 100,
        ..SynthConfig::default()
    })
    .unwrap();
    let low = simulate_low_mag(&stack, &PsfParams::low_mag_for(&stack), 2.5).unwrap();
    assert_eq!(low.dims(), (40, 40));
    assert!((low.pixel_pitch() - 0.1625).abs() < 1e-12);
    let fused = fuse_wavelet(&low, &FilterBank::sym8(), 12).unwrap();
    assert_eq!(fused.dims(), (40, 40));
}
