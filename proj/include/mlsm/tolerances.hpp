#pragma once

namespace mlsm {

// Numerical thresholds shared across modules. Defaults are the documented
// values; the run config may override any of them.
struct Tolerances {
    // Relative singular-value cut for the numerical rank of a centered product.
    double rank_relative = 1e-8;
    // Projection norms closer than this are reported as a selection tie.
    double selection_tie = 1e-10;
    // Eigenvalue floor (relative to the trace) when inverting a curvature matrix.
    double curvature_floor = 1e-12;
    // Rank-deficiency cut for QR / spectral factors.
    double factor_rank = 1e-12;
    // Relative gap under which two Gram diagonals count as tied in simulation.
    double gram_gap = 1e-6;
    // Fraction of the clamp at which a predictor is reported as on the boundary.
    double boundary_fraction = 0.99;
};

}  // namespace mlsm
