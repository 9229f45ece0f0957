"""Camera calibration, angle measurement and planar odometry through the calibrating conic and the conformal point."""

from .calibration import (
    AngleMeasurement,
    CalibratingConic,
    CalibrationMatrix,
    IacConic,
    angle_algebraic,
    angle_cross_ratio,
    angle_cross_ratio_batch,
    calibrating_conic_from_k,
    conic_from_three_orthogonal_vps,
    iac_from_k,
    k_from_calibrating_conic,
    k_from_iac,
    reflected_polar,
)
from .conformal import (
    ConformalPoint,
    PlaneAngleQuery,
    camera_tilt,
    conformal_point_from_conic,
    conformal_point_from_k,
    conformal_point_from_known_angle,
    conformality_check,
    field_of_view,
    focal_conformal_method,
    focal_reflected_polar_method,
    plane_angle,
)
from .errors import (
    ConditioningWarning,
    DegenerateInputError,
    EstimationError,
    GeometryError,
    HorizonNotIdentifiableError,
    NotSquarePixelsError,
    SchemaError,
)
from .matches import MatchSet
from .odometry import (
    Homography,
    OdometryConfig,
    PlanarTrajectory,
    average_rotations,
    estimate_homography,
    horizon_from_homography,
    median_rotation,
    ransac_rotation,
    run_sequence,
    two_point_rotation,
)
from .projective import Conic, HomLine, HomPoint, cross_ratio, join, meet, polar, pole

__version__ = "0.1.0"
