"""Tunable constants.

None of these come from measurements; they are defaults chosen so the
simulated room, robot and sensors behave sensibly at desk scale.
"""

# rendering intensities (0..255)
FREE_LEVEL = 200
OBSTACLE_LEVEL = 40
ROBOT_LEVEL = 90
PERSON_LEVEL = 140

# room and robot
ROOM_SIZE_M = 6.0
RESOLUTION_M = 0.1
ROBOT_RADIUS_M = 0.15
TRACK_WIDTH_M = 0.3
V_MAX = 0.3  # m/s
W_MAX = 1.0  # rad/s

# vision
BGSUB_THRESHOLD = 50
MS_SPATIAL_BW = 3
MS_RANGE_BW = 30
MS_MIN_REGION = 4
MS_MAX_ITER = 20
MS_TOL = 0.1

# load cells
LOAD_CELL_MAX_LBF = 500.0
SENSOR_RATE_HZ = 10.0
VARIANCE_FLOOR = 1.0  # lbf^2
DEBOUNCE_N = 5

# nightstand
N_TRAYS = 3
TILT_DEADBAND_DEG = 10.0
TRAY_RATE_DEG_S = 45.0
DOOR_TIME_S = 2.0
IR_THRESHOLD_CM = 10.0
IR_HYSTERESIS_CM = 2.0
IR_REFRACTORY_S = 1.0
LIFT_RATE_MM_S = 20.0
LIFT_MAX_MM = 200.0

# radio link
LINK_MEAN_DELAY_MS = 8.0
LINK_RANGE_FT = 100.0
LINK_MIN_DELAY_MS = 0.1
MAX_PAYLOAD = 64

# simulation
ROBOT_RATE_HZ = 20.0
DEFAULT_SEED = 7
