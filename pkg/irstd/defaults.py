# Output directory used when --out is not given
DEFAULT_OUT_DIR = "run"

# File names inside the output directory
MANIFEST_NAME = "manifest.txt"
GROUND_TRUTH_NAME = "ground_truth.csv"
TARGET_MAPS_NAME = "target_maps.txt"
DIAGNOSTICS_NAME = "diagnostics.csv"
TIMING_NAME = "timing.csv"
ROC_NAME = "roc.csv"
AUC_NAME = "auc.csv"
SWEEP_NAME = "sweep.csv"
RUN_LOG_NAME = "run.log"

# --- Solver (ADMM) ---

SOLVER_CONFIG = {
    # Size of the core D in the L*D*R tri-factorization. Bigger keeps more of
    # the background; must not exceed min(n1, n2) of the window tensor.
    "R": 180,

    # Frames per window (n3 of the tensor K).
    "FRAMES_PER_WINDOW": 3,

    # Tuning parameter H, lambda_s = H / sqrt(max(n1, n2) * L).
    "H_TUNING": 6.0,

    # Weight of the spatial-temporal TV term.
    "LAMBDA_TV": 0.5,

    # Weight of the Frobenius noise term.
    "LAMBDA3": 100.0,

    # Temporal TV weight. Only scales the threshold of V3.
    "DELTA": 1.0,

    # Penalty schedule: mu_{k+1} = min(rho * mu_k, mu_max).
    "MU0": 0.005,
    "RHO": 1.5,
    "MU_MAX": 1e7,

    # Stopping tolerance on the relative residual.
    "XI": 1e-6,

    # TLNMTQR passes per Z-update. One pass is enough in practice.
    "INNER_ITERS": 1,

    # ADMM iteration cap.
    "MAX_OUTER_ITERS": 500,

    # Tri-factorization fit: stop at ||Z - LDR||_F^2 <= eps or after max iterations.
    "TRIFACTOR_EPS": 1e-6,
    "TRIFACTOR_ITERS": 20,

    # Use ||K-B-T-N||^2/||K||^2 instead of the residual with the +y1/mu term.
    "PLAIN_RESIDUAL": False,
}

# --- Windowing ---

# Temporal step between windows. None means "same as frames per window".
WINDOW_STEP = None
# Spatial patch mode is off when PATCH_SIZE is None (full frame windows).
PATCH_SIZE = None
PATCH_STRIDE = None

# --- Evaluation ---

ROC_THRESHOLDS = 101
MATCH_RADIUS = 4.0
# "component" follows true/false detections of connected components,
# "pixel" scores target centroid pixels against background pixels.
ROC_MODE = "component"

# --- Synthetic sequences ---

SYNTH_WIDTH = 256
SYNTH_HEIGHT = 256
SYNTH_FRAMES = 9
SYNTH_BACKGROUND_RANK = 2
SYNTH_NOISE_SIGMA = 0.02
SYNTH_DRIFT = 0.02
SYNTH_SEED = 20240501
TARGET_SIGMA = 1.5
# (x0, y0, vx, vy, amplitude) of the default moving targets
SYNTH_TARGETS = [
    (60.0, 70.0, 1.5, 0.5, 0.25),
    (180.0, 60.0, -1.0, 1.0, 0.25),
    (128.0, 190.0, 0.5, -1.5, 0.25),
]

# --- Parameter analysis grids ---

SWEEP_GRIDS = {
    "r": [10, 50, 90, 130, 170, 210],
    "frames_per_window": [2, 3, 4, 5, 6],
    "h_tuning": [2.0, 4.0, 6.0, 8.0, 10.0],
}
