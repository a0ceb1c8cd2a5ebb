OPINION_MIN = -1.0
OPINION_MAX = 1.0

OUTPUT_PATH = "data/output"
DEFAULT_CHECKPOINT_FILE = "data/checkpoints/gmp_params.ckpt"
COMPRESSION_ALGO = "snappy"

# simulation
DEFAULT_T_MAX = 30
DEFAULT_TOP_K = 100
DEFAULT_ENTROPY_BINS = 10
DEFAULT_ENTROPY_WINDOW = 1
SYNTHETIC_OPINION_STD = 0.3
NEWS_AUTHOR_ID = -1
CENTRALITY_ROUNDS = (1, 5, 10, 15, 20, 25, 30)
PERCENTILE_BANDS = (">=p80", "p60-80", "p40-60", "<p40")

# network generation
MIN_IN_DEGREE = 10

# graph-optimized memory
DEFAULT_KNN = 10
DEFAULT_LAMBDA = 0.5
DEFAULT_NU = 1.0
DEFAULT_TAU = 0.9
DEFAULT_MAX_ITERS = 20
DEFAULT_RESIDUAL_TOL = 1e-8
DEFAULT_TOP_R = 5
DEFAULT_DEGREE_EPSILON = 1e-6
CLOSED_FORM_MAX_NODES = 2000
DIVERGENCE_PATIENCE = 3

# embeddings
CONTENT_DIM = 384
PROFILE_DIM = 768
KEYWORD_COUNT = 3

# graph message passing
DYNAMIC_FEATURE_DIM = 9
MLP_HIDDEN_DIM = 64
GAT_HEADS = 4
GAT_HEAD_DIM = 8
GAT_DEPTH = 2
LEAKY_RELU_SLOPE = 0.2
SELF_LOOP_WEIGHT = 1.0
FEATURE_CHUNK_SIZE = 512

# training
DEFAULT_ALPHA = 0.9
DEFAULT_BETA = 0.1
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_EPOCHS = 200
DEFAULT_TRAIN_WINDOW = 10
DEFAULT_VIRTUAL_AGENTS = 1000
KMEANS_MAX_ITER = 50

# baselines
BENCH_SIZES = (1_000, 10_000, 100_000)
BENCH_EXTRAPOLATE_AGENTS = 1_000_000
BENCH_EXTRAPOLATE_STEPS = 30

# remote providers
DEFAULT_API_KEY_ENV = "OPINION_SIM_API_KEY"
DEFAULT_REMOTE_MODEL = "gpt-4o-mini"
DEFAULT_TIMEOUT_SECONDS = 30.0
DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF_SECONDS = 1.0
DEFAULT_MAX_IN_FLIGHT = 8

DATASET_SCHEMA = {
    "user_id": "VARCHAR",
    "user_description": "VARCHAR",
    "follower_count": "BIGINT",
    "following_count": "BIGINT",
    "tweet_content": "VARCHAR",
    "posting_time": "TIMESTAMP",
    "opinion_value": "DOUBLE"
}

METRIC_NAMES = ("ΔBias", "ΔDiv", "Corr.", "F.")

REPORT_FIELDS = ("trend", "per_step_partitions", "metrics", "centrality_table", "config")
