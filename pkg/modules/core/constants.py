"""
Constants module for PulseSync
Centralized location for shared simulation constants
"""

# Virtual time is kept in integer ticks; one tau (the delay bound) is this many ticks.
# A power of two keeps every normalized time an exact binary fraction.
TICKS_PER_TAU = 1024

# Default event cap before a run is declared livelocked
DEFAULT_EVENT_CAP = 10 ** 8

# Registration for pulse p happens in clusters of the 2^(level(p) + shift)-cover
DEFAULT_RADIUS_SHIFT = 5

# Fast-edge delay of the edge-biased adversary, as a fraction of tau
DEFAULT_EDGE_BIAS_EPSILON = 1 / 16

# Number of trailing trace entries attached to a NodeHandlerError
TRACE_TAIL_LENGTH = 20

# Payloads larger than PAYLOAD_WORDS_PER_LOG * log2(n) scalar words trigger a soft warning
PAYLOAD_WORDS_PER_LOG = 4
PAYLOAD_WORDS_FLOOR = 8

# Supported graph families and adversaries
GRAPH_FAMILIES = ('path', 'cycle', 'grid', 'random-connected', 'balanced-tree', 'complete', 'star')
ADVERSARY_KINDS = ('max-delay', 'uniform-random', 'edge-biased', 'lifo-queue')

# Termination approaches for the complete BFS drivers
TERMINATION_APPROACHES = ('approach1', 'approach2', 'fixed-t')

# Cover construction modes used by drivers that grow covers while running
COVER_MODES = ('sync', 'async')

# Algorithms accepted by the harness
ALGORITHMS = ('bfs', 'multi-bfs', 'leader', 'mst', 'sync-generic', 'alpha-baseline')

# Extra edges per node added by the random-connected generator on top of its spanning tree
RANDOM_EXTRA_EDGE_FACTOR = 1.0

# Branching factor of the balanced-tree family
BALANCED_TREE_ARITY = 2

# Tree-aggregation messages for the checking stage are prioritized after every pulse
CHECKING_STAGE_OFFSET = 1

# Sweep CSV header (fixed order)
SWEEP_CSV_FIELDS = (
    'n', 'm', 'D', 'seed', 'algorithm', 'adversary',
    'messages_total', 'messages_algorithm', 'messages_ack',
    'messages_by_category', 'normalized_time', 'time_to_all_outputs',
    'overhead_ratio', 'alpha_messages_total', 'alpha_overhead_ratio',
)

# Regression bounds on the measured cover constants (normalized by powers of log2 n)
COVER_CONSTANT_BOUNDS = {
    'c_mem': 3.0,     # memberships per node / log n
    'c_color': 3.0,   # colors / log n
    'c_str': 8.0,     # tree depth / (d log^3 n)
    'c_tree': 4.0,    # trees per edge / log^4 n
    'c_rad': 8.0,     # Steiner tree radius / (k log^3 n)
}
