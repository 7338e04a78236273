# pipeline_defaults.py

# Stay extraction
T_MIN_SECONDS = 3600       # 60 min dwell
D_MAX_METERS = 100.0       # roaming radius around the reference point
DIAM_MAX_METERS = 200.0    # diameter-based extractor only
BUFFER_METERS = 10.0       # GPS noise allowance around each stay hull

# Destination extraction
J_MIN = 0.10
F_MIN = 6
EPS_METERS = 100.0         # OPTICS neighbourhood
MIN_PTS = 6
DIAMETER_MIN_METERS = 200.0

# Partitioning
CELL_SIZE_METERS = 5.0     # below the buffer width, so quantisation < sensor noise
MAX_MICRO_CELLS = 10 ** 8

# Geometry kernel
QUAD_SEGMENTS = 16         # arc segments per quarter circle
SLIVER_AREA = 1e-6         # m², anything smaller is treated as empty
PARTITION_TOLERANCE = 1e-3  # m², overlap/uncovered area allowed by the validator

# Projection
EARTH_RADIUS_METERS = 6371008.8

# Output
FLOAT_DIGITS = 9           # significant digits in every written number

STAY_METHODS = ("twc", "refpoint", "diameter")
DESTINATION_METHODS = ("geometric", "optics", "diameter")
CELL_METRICS = ("GS", "PCS")
LABEL_STRATEGIES = ("intersection", "nnq")

# Synthetic scenarios are placed around Anchorage
SCENARIO_ORIGIN = (61.2181, -149.9003)
