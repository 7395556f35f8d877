#![allow(dead_code)]

use intake_core::archspec::{builtin_arch, propagate_shapes};

/// Output-size cells as printed in the published layer tables:
/// `(architecture, pathway, layer, cell)`, pathway `None` for fusion and head rows.
pub const PRINTED_CELLS: &[(&str, Option<&str>, &str, &str)] = &[
    // small 2D CNN, frames
    ("small_2d_cnn_frame", Some("main"), "data", "128²×3"),
    ("small_2d_cnn_frame", Some("main"), "conv1", "128²×32"),
    ("small_2d_cnn_frame", Some("main"), "pool1", "64²×32"),
    ("small_2d_cnn_frame", Some("main"), "conv2", "64²×32"),
    ("small_2d_cnn_frame", Some("main"), "pool2", "32²×32"),
    ("small_2d_cnn_frame", Some("main"), "conv3", "32²×64"),
    ("small_2d_cnn_frame", Some("main"), "pool3", "16²×64"),
    ("small_2d_cnn_frame", Some("main"), "conv4", "16²×64"),
    ("small_2d_cnn_frame", Some("main"), "pool4", "8²×64"),
    ("small_2d_cnn_frame", None, "flatten", "4096"),
    ("small_2d_cnn_frame", None, "dense1", "1024"),
    ("small_2d_cnn_frame", None, "dense2", "2"),
    // small 2D CNN, flows
    ("small_2d_cnn_flow", Some("main"), "data", "128²×2"),
    ("small_2d_cnn_flow", Some("main"), "conv1", "128²×32"),
    ("small_2d_cnn_flow", Some("main"), "pool1", "64²×32"),
    ("small_2d_cnn_flow", Some("main"), "conv2", "64²×32"),
    ("small_2d_cnn_flow", Some("main"), "pool2", "32²×32"),
    ("small_2d_cnn_flow", Some("main"), "conv3", "32²×64"),
    ("small_2d_cnn_flow", Some("main"), "pool3", "16²×64"),
    ("small_2d_cnn_flow", Some("main"), "conv4", "16²×64"),
    ("small_2d_cnn_flow", Some("main"), "pool4", "8²×64"),
    ("small_2d_cnn_flow", None, "flatten", "4096"),
    ("small_2d_cnn_flow", None, "dense1", "1024"),
    ("small_2d_cnn_flow", None, "dense2", "2"),
    // small 3D CNN
    ("small_3d_cnn", Some("main"), "data", "16×128²×3"),
    ("small_3d_cnn", Some("main"), "conv1", "16×128²×32"),
    ("small_3d_cnn", Some("main"), "pool1", "8×64²×32"),
    ("small_3d_cnn", Some("main"), "conv2", "8×64²×32"),
    ("small_3d_cnn", Some("main"), "pool2", "4×32²×32"),
    ("small_3d_cnn", Some("main"), "conv3", "4×32²×64"),
    ("small_3d_cnn", Some("main"), "pool3", "2×16²×64"),
    ("small_3d_cnn", Some("main"), "conv4", "2×16²×64"),
    ("small_3d_cnn", Some("main"), "pool4", "1×8²×64"),
    ("small_3d_cnn", None, "flatten", "4096"),
    ("small_3d_cnn", None, "dense1", "1024"),
    ("small_3d_cnn", None, "dense2", "2"),
    // small CNN-LSTM
    ("small_cnn_lstm", Some("main"), "data", "16×128²×3"),
    ("small_cnn_lstm", Some("main"), "conv1", "16×128²×32"),
    ("small_cnn_lstm", Some("main"), "pool1", "16×64²×32"),
    ("small_cnn_lstm", Some("main"), "conv2", "16×64²×32"),
    ("small_cnn_lstm", Some("main"), "pool2", "16×32²×32"),
    ("small_cnn_lstm", Some("main"), "conv3", "16×32²×64"),
    ("small_cnn_lstm", Some("main"), "pool3", "16×16²×64"),
    ("small_cnn_lstm", Some("main"), "conv4", "16×16²×64"),
    ("small_cnn_lstm", Some("main"), "pool4", "16×8²×64"),
    ("small_cnn_lstm", None, "flatten", "16×4096"),
    ("small_cnn_lstm", None, "dense1", "16×1024"),
    ("small_cnn_lstm", None, "lstm", "16×128"),
    ("small_cnn_lstm", None, "dense2", "16×2"),
    // small Two-Stream
    ("small_two_stream", Some("frame"), "data", "128²×3"),
    ("small_two_stream", Some("frame"), "conv1", "128²×32"),
    ("small_two_stream", Some("frame"), "pool1", "64²×32"),
    ("small_two_stream", Some("frame"), "conv2", "64²×32"),
    ("small_two_stream", Some("frame"), "pool2", "32²×32"),
    ("small_two_stream", Some("frame"), "conv3", "32²×64"),
    ("small_two_stream", Some("frame"), "pool3", "16²×64"),
    ("small_two_stream", Some("frame"), "conv4", "16²×64"),
    ("small_two_stream", Some("frame"), "pool4", "8²×64"),
    ("small_two_stream", Some("flow"), "data", "128²×32"),
    ("small_two_stream", Some("flow"), "conv0", "128²×3"),
    ("small_two_stream", Some("flow"), "conv1", "128²×32"),
    ("small_two_stream", Some("flow"), "pool1", "64²×32"),
    ("small_two_stream", Some("flow"), "conv2", "64²×32"),
    ("small_two_stream", Some("flow"), "pool2", "32²×32"),
    ("small_two_stream", Some("flow"), "conv3", "32²×64"),
    ("small_two_stream", Some("flow"), "pool3", "16²×64"),
    ("small_two_stream", Some("flow"), "conv4", "16²×64"),
    ("small_two_stream", Some("flow"), "pool4", "8²×64"),
    ("small_two_stream", None, "fusion", "8²×64"),
    ("small_two_stream", None, "flatten", "4096"),
    ("small_two_stream", None, "dense1", "1024"),
    ("small_two_stream", None, "dense2", "2"),
    // small SlowFast
    ("small_slowfast", Some("slow"), "data", "4×128²×3"),
    ("small_slowfast", Some("slow"), "conv1", "4×128²×32"),
    ("small_slowfast", Some("slow"), "pool1", "4×64²×32"),
    ("small_slowfast", Some("slow"), "conv2", "4×64²×32"),
    ("small_slowfast", Some("slow"), "pool2", "4×32²×32"),
    ("small_slowfast", Some("slow"), "conv3", "4×32²×64"),
    ("small_slowfast", Some("slow"), "pool3", "4×16²×64"),
    ("small_slowfast", Some("slow"), "conv4", "4×16²×64"),
    ("small_slowfast", Some("slow"), "pool4", "4×8²×64"),
    ("small_slowfast", Some("fast"), "data", "16×128²×3"),
    ("small_slowfast", Some("fast"), "conv1", "16×128²×8"),
    ("small_slowfast", Some("fast"), "pool1", "16×64²×8"),
    ("small_slowfast", Some("fast"), "conv2", "16×64²×8"),
    ("small_slowfast", Some("fast"), "pool2", "16×32²×8"),
    ("small_slowfast", Some("fast"), "conv3", "16×32²×16"),
    ("small_slowfast", Some("fast"), "pool3", "16×16²×16"),
    ("small_slowfast", Some("fast"), "conv4", "16×16²×16"),
    ("small_slowfast", Some("fast"), "pool4", "16×8²×16"),
    ("small_slowfast", None, "fusion", "8²×64"),
    ("small_slowfast", None, "flatten", "4096"),
    ("small_slowfast", None, "dense1", "1024"),
    ("small_slowfast", None, "dense2", "2"),
    // ResNet-50 2D CNN, frames
    ("resnet50_2d_cnn_frame", Some("main"), "data", "224²×3"),
    ("resnet50_2d_cnn_frame", Some("main"), "conv1", "112²×64"),
    ("resnet50_2d_cnn_frame", Some("main"), "pool1", "56²×64"),
    ("resnet50_2d_cnn_frame", Some("main"), "res2", "56²×256"),
    ("resnet50_2d_cnn_frame", Some("main"), "res3", "28²×512"),
    ("resnet50_2d_cnn_frame", Some("main"), "res4", "14²×1024"),
    ("resnet50_2d_cnn_frame", Some("main"), "res5", "7²×2048"),
    ("resnet50_2d_cnn_frame", None, "spatial_pool", "1²×2048"),
    ("resnet50_2d_cnn_frame", None, "flatten", "2048"),
    ("resnet50_2d_cnn_frame", None, "dense", "2"),
    // ResNet-50 2D CNN, flows
    ("resnet50_2d_cnn_flow", Some("main"), "data", "224²×2"),
    ("resnet50_2d_cnn_flow", Some("main"), "conv0", "112²×3"),
    ("resnet50_2d_cnn_flow", Some("main"), "conv1", "112²×64"),
    ("resnet50_2d_cnn_flow", Some("main"), "pool1", "56²×64"),
    ("resnet50_2d_cnn_flow", Some("main"), "res2", "56²×256"),
    ("resnet50_2d_cnn_flow", Some("main"), "res3", "28²×512"),
    ("resnet50_2d_cnn_flow", Some("main"), "res4", "14²×1024"),
    ("resnet50_2d_cnn_flow", Some("main"), "res5", "7²×2048"),
    ("resnet50_2d_cnn_flow", None, "spatial_pool", "1²×2048"),
    ("resnet50_2d_cnn_flow", None, "flatten", "2048"),
    ("resnet50_2d_cnn_flow", None, "dense", "2"),
    // ResNet-50 3D CNN
    ("resnet50_3d_cnn", Some("main"), "data", "16×128²×3"),
    ("resnet50_3d_cnn", Some("main"), "conv1", "16×128²×64"),
    ("resnet50_3d_cnn", Some("main"), "pool1", "8×64²×64"),
    ("resnet50_3d_cnn", Some("main"), "res2", "8×64²×256"),
    ("resnet50_3d_cnn", Some("main"), "res3", "4×32²×512"),
    ("resnet50_3d_cnn", Some("main"), "res4", "2×16²×1024"),
    ("resnet50_3d_cnn", Some("main"), "res5", "1×8²×2048"),
    ("resnet50_3d_cnn", None, "spatial_pool", "1×1²×2048"),
    ("resnet50_3d_cnn", None, "flatten", "2048"),
    ("resnet50_3d_cnn", None, "dense", "2"),
    // ResNet-50 CNN-LSTM
    ("resnet50_cnn_lstm", Some("main"), "data", "16×224²×3"),
    ("resnet50_cnn_lstm", Some("main"), "conv1", "16×112²×64"),
    ("resnet50_cnn_lstm", Some("main"), "pool1", "16×56²×64"),
    ("resnet50_cnn_lstm", Some("main"), "res2", "16×56²×256"),
    ("resnet50_cnn_lstm", Some("main"), "res3", "16×28²×512"),
    ("resnet50_cnn_lstm", Some("main"), "res4", "16×14²×1024"),
    ("resnet50_cnn_lstm", Some("main"), "res5", "16×7²×2048"),
    ("resnet50_cnn_lstm", None, "spatial_pool", "16×1²×2048"),
    ("resnet50_cnn_lstm", None, "flatten", "16×2048"),
    ("resnet50_cnn_lstm", None, "lstm", "16×128"),
    ("resnet50_cnn_lstm", None, "dense", "16×2"),
    // ResNet-50 Two-Stream
    ("resnet50_two_stream", Some("frame"), "data", "224²×3"),
    ("resnet50_two_stream", Some("frame"), "conv1", "112²×64"),
    ("resnet50_two_stream", Some("frame"), "pool1", "56²×64"),
    ("resnet50_two_stream", Some("frame"), "res2", "56²×256"),
    ("resnet50_two_stream", Some("frame"), "res3", "28²×512"),
    ("resnet50_two_stream", Some("frame"), "res4", "14²×1024"),
    ("resnet50_two_stream", Some("frame"), "res5", "7²×2048"),
    ("resnet50_two_stream", Some("flow"), "data", "224²×32"),
    ("resnet50_two_stream", Some("flow"), "conv0", "224²×3"),
    ("resnet50_two_stream", Some("flow"), "conv1", "112²×64"),
    ("resnet50_two_stream", Some("flow"), "pool1", "56²×64"),
    ("resnet50_two_stream", Some("flow"), "res2", "56²×256"),
    ("resnet50_two_stream", Some("flow"), "res3", "28²×512"),
    ("resnet50_two_stream", Some("flow"), "res4", "14²×1024"),
    ("resnet50_two_stream", Some("flow"), "res5", "7²×2048"),
    ("resnet50_two_stream", None, "fusion", "7²×2048"),
    ("resnet50_two_stream", None, "spatial_pool", "1²×2048"),
    ("resnet50_two_stream", None, "flatten", "2048"),
    ("resnet50_two_stream", None, "dense", "2"),
    // ResNet-50 SlowFast
    ("resnet50_slowfast", Some("slow"), "data", "2×128²×3"),
    ("resnet50_slowfast", Some("slow"), "conv1", "2×128²×64"),
    ("resnet50_slowfast", Some("slow"), "pool1", "2×64²×64"),
    ("resnet50_slowfast", Some("slow"), "res2", "2×64²×256"),
    ("resnet50_slowfast", Some("slow"), "res3", "2×32²×512"),
    ("resnet50_slowfast", Some("slow"), "res4", "2×16²×1024"),
    ("resnet50_slowfast", Some("slow"), "res5", "2×8²×2048"),
    ("resnet50_slowfast", Some("fast"), "data", "16×128²×3"),
    ("resnet50_slowfast", Some("fast"), "conv1", "16×128²×8"),
    ("resnet50_slowfast", Some("fast"), "pool1", "16×64²×8"),
    ("resnet50_slowfast", Some("fast"), "res2", "16×64²×32"),
    ("resnet50_slowfast", Some("fast"), "res3", "16×32²×64"),
    ("resnet50_slowfast", Some("fast"), "res4", "16×16²×128"),
    ("resnet50_slowfast", Some("fast"), "res5", "16×8²×256"),
    ("resnet50_slowfast", None, "fusion", "1×1²×2560"),
    ("resnet50_slowfast", None, "flatten", "2560"),
    ("resnet50_slowfast", None, "dense", "2"),
];

/// Printed cells that contradict the surrounding rows or the stated counts:
/// `(architecture, pathway, layer, printed, propagated)`.
///
/// * The ResNet flow adapter is a stride-1 conv on a 224² input feeding a
///   stride-2 conv whose printed output is 112², so its own output is 224².
/// * The ResNet SlowFast fast-pathway widths are printed at 1/8 of the slow
///   widths; a 1/4 ratio is stated and is the only one consistent with the
///   2560-wide fused vector (2048 + 512) and the published parameter count.
pub const DOCUMENTED_ERRATA: &[(&str, Option<&str>, &str, &str, &str)] = &[
    ("resnet50_2d_cnn_flow", Some("main"), "conv0", "112²×3", "224²×3"),
    ("resnet50_slowfast", Some("fast"), "conv1", "16×128²×8", "16×128²×16"),
    ("resnet50_slowfast", Some("fast"), "pool1", "16×64²×8", "16×64²×16"),
    ("resnet50_slowfast", Some("fast"), "res2", "16×64²×32", "16×64²×64"),
    ("resnet50_slowfast", Some("fast"), "res3", "16×32²×64", "16×32²×128"),
    ("resnet50_slowfast", Some("fast"), "res4", "16×16²×128", "16×16²×256"),
    ("resnet50_slowfast", Some("fast"), "res5", "16×8²×256", "16×8²×512"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMismatch {
    pub arch: String,
    pub pathway: Option<String>,
    pub layer: String,
    pub printed: String,
    pub propagated: String,
}

/// Compares every printed cell with the propagated shape; missing rows count
/// as mismatches with an empty propagated cell.
pub fn cell_mismatches() -> (usize, Vec<CellMismatch>) {
    let mut mismatches = Vec::new();
    for &(arch, pathway, layer, printed) in PRINTED_CELLS {
        let rows = propagate_shapes(&builtin_arch(arch).expect("builtin")).expect("propagates");
        let propagated = rows
            .iter()
            .find(|r| r.pathway.as_deref() == pathway && r.layer == layer)
            .map(|r| r.output.to_string())
            .unwrap_or_default();
        if propagated != printed {
            mismatches.push(CellMismatch {
                arch: arch.to_string(),
                pathway: pathway.map(str::to_string),
                layer: layer.to_string(),
                printed: printed.to_string(),
                propagated,
            });
        }
    }
    (PRINTED_CELLS.len(), mismatches)
}

pub fn documented_errata() -> Vec<CellMismatch> {
    DOCUMENTED_ERRATA
        .iter()
        .map(|&(arch, pathway, layer, printed, propagated)| CellMismatch {
            arch: arch.to_string(),
            pathway: pathway.map(str::to_string),
            layer: layer.to_string(),
            printed: printed.to_string(),
            propagated: propagated.to_string(),
        })
        .collect()
}

/// Published (TP, FP1, FP2, FN, F1) rows.
pub const PUBLISHED_COUNTS: &[(&str, u64, u64, u64, u64, f64)] = &[
    ("small 2D CNN (frames)", 670, 39, 287, 321, 0.674),
    ("small 2D CNN (flows)", 662, 45, 1023, 329, 0.487),
    ("ResNet-50 2D CNN (frames)", 829, 54, 211, 162, 0.795),
    ("ResNet-50 2D CNN (flows)", 661, 53, 1163, 330, 0.461),
    ("small 3D CNN", 795, 37, 169, 196, 0.798),
    ("small CNN-LSTM", 674, 17, 104, 317, 0.755),
    ("small Two-Stream", 653, 36, 185, 338, 0.700),
    ("small SlowFast", 754, 31, 103, 237, 0.803),
    ("ResNet-50 3D CNN", 775, 25, 54, 216, 0.840),
    ("ResNet-50 CNN-LSTM", 791, 29, 38, 200, 0.856),
    ("ResNet-50 Two-Stream", 806, 49, 82, 185, 0.836),
    ("ResNet-50 SlowFast", 824, 23, 83, 167, 0.858),
];

/// Published parameter counts (millions) and the allowed relative error.
pub const PUBLISHED_PARAMS: &[(&str, f64, f64)] = &[
    ("small_2d_cnn_frame", 4.26, 0.01),
    ("small_2d_cnn_flow", 4.26, 0.01),
    ("small_3d_cnn", 4.39, 0.01),
    ("small_cnn_lstm", 4.85, 0.01),
    ("small_two_stream", 4.34, 0.01),
    ("small_slowfast", 4.49, 0.03),
    ("resnet50_2d_cnn_frame", 23.5, 0.03),
    ("resnet50_2d_cnn_flow", 23.5, 0.03),
    ("resnet50_3d_cnn", 32.2, 0.03),
    ("resnet50_cnn_lstm", 24.6, 0.03),
    ("resnet50_two_stream", 47.0, 0.03),
    ("resnet50_slowfast", 36.7, 0.03),
];
