"""Codec constants and defaults (no torch/model imports)."""
from pathlib import Path

# Paths
PACKAGE_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_BOOKS_DIR = PACKAGE_ROOT / "books"
DEFAULT_CACHE_DIR = PACKAGE_ROOT / ".cache"
CACHE_ENV_VAR = "HOLOCODEC_CACHE"
DEBUG_ENV_VAR = "HOLOCODEC_DEBUG"

# Optics (full scale)
WAVELENGTHS = {0: 638e-9, 1: 520e-9, 2: 450e-9}  # channel id -> meters (R, G, B)
CHANNEL_NAMES = {0: "red", 1: "green", 2: "blue"}
DEFAULT_CHANNEL = 1
PIXEL_PITCH = 6.4e-6
PROPAGATION_DISTANCE = 0.20
FULL_FRAME = (1072, 1920)
FULL_ROI = (700, 1400)
PAD_FACTOR = 2
GAMMA = 2.2

# Optics (desk scale)
DESK_FRAME = (64, 128)
DESK_ROI = (48, 96)
DESK_DISTANCE = 2e-3

# Phase retrieval baselines
RETRIEVAL_ITERATIONS = 100
SGD_STEP_SIZE = 0.1
RETRIEVAL_INITS = ("random", "zeros", "provided")
DATA_INITIALIZERS = ("random", "zeros", "gs", "sgd")
INITIALIZER_ITERATIONS = 20

# Vector quantization
EMA_DECAY = 0.95
COMMITMENT_BETA = 0.25
LAPLACE_EPS = 1e-5
DEAD_CODE_THRESHOLD = 1e-3
RESEED_RESERVOIR = 4096  # latent rows kept per epoch as reseeding candidates
QUANTIZE_CHUNK_ELEMENTS = 1 << 24  # cap on rows*K*D held at once by the exhaustive scan

# Codec profiles: name -> (bottom factor, top factor, R, channel depth, D, K_bottom, K_top, id)
PROFILES = {
    "desk": {"factors": (4, 8), "residual_blocks": 2, "residual_channels": 32, "latent_dim": 32,
             "codebook_sizes": (64, 64), "profile_id": 0},
    "low": {"factors": (4, 8), "residual_blocks": 4, "residual_channels": 128, "latent_dim": 128,
            "codebook_sizes": (4096, 4096), "profile_id": 1},
    "ultra-low": {"factors": (8, 16), "residual_blocks": 4, "residual_channels": 128, "latent_dim": 128,
                  "codebook_sizes": (4096, 4096), "profile_id": 2},
}
DEFAULT_PROFILE = "desk"

# Loss
LOSS_WEIGHTS = (1.0, 0.1, 0.025)  # mse, ms-ssim, watson-dft
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MSSSIM_LEVELS = 5
DESK_MSSSIM_LEVELS = 3
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
WATSON_CUTOFF = 0.25  # cycles/pixel where the frequency weight halves

# Training
STAGE1_EPOCHS = 100
STAGE2_EPOCHS = 20
LEARNING_RATE = 1e-4
BATCH_SIZE = 4
GRAD_CLIP_NORM = 5.0

# Rate adaptation
ADAPTER_HIDDEN = 64
ADAPTER_MIN_FRACTION = 8  # desk range is [K/8, K]
FULL_ADAPTER_RANGE = (512, 4096)

# Bitstream / transport
STREAM_MAGIC = b"RAVQ"
MULTI_MAGIC = b"RAVM"
CODEBOOK_MAGIC = b"RVQC"
FORMAT_VERSION = 1
CHECKPOINT_FORMAT = "holocodec-checkpoint"
CHECKPOINT_VERSION = 1
MAX_FRAME_BYTES = 64 * 1024 * 1024
CONNECT_ATTEMPTS = 3

# Evaluation
PSNR_CAP_DB = 100.0
BD_MIN_POINTS = 3
BD_OVERLAP_WARN = 0.5
CSV_FIELDS = ["image", "channel", "K", "bpp_fixed", "bpp_entropy", "psnr", "ssim", "msssim"]
