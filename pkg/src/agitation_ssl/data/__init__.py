from .cohort import Cohort, CohortSpec, generate_cohort
from .events import SENSORS, SensorEvent, aggregate_hourly, aggregate_log, parse_event_log
from .matrix import DailyActivityMatrix, Label, Normalizer, load_dataset, normalize, save_dataset
from .split import kfold_split, train_test_folds
