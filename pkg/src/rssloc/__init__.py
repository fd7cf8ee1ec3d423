"""RSS-based target localization with three MLE initialization strategies."""

from .channel import MIN_DISTANCE_M, PathLossModel, RssSample, expected_rss, sample_rss
from .estimators import (GridSpec, LocalizerConfig, LocalizeResult, SdpNonConvergence,
                         SdpSolution, UnknownVector, closed_form_p0, fp_mle_cost,
                         grid_search_mle, localize, mle_cost, rand_init,
                         solve_sdp_init)
from .fingerprint import (CategoryLabel, FingerprintEntry, FingerprintMap, Label,
                          PositionLabel, build_map, init_region, knn_match,
                          map_rss_at, mse_distance, read_map_csv, write_map_csv)
from .geometry import Box, PolygonRegion, Position, SearchRegion, distance
from .metrics import (EstimateReport, StrategySummary, TrialRecord, cdf_points,
                      fcc_horizontal_check, percentile, rmse)
from .scenario import (BaseStation, MeasurementSet, Scenario,
                       build_fingerprint_from_scenario, generate_trial,
                       load_scenario, make_poor_geometry, run_experiment,
                       save_scenario)

__version__ = "0.1.0"
