"""driftkit: streaming drift detection, decomposition, and theory checks."""

from .bench import (
    BenchReport,
    CellRun,
    DetectionScore,
    MatchingConfig,
    evaluate_decomposition,
    run_benchmark,
    run_detector,
    score_detections,
    table1_suite,
)
from .decompose import (
    ConvergenceError,
    CurveModel,
    Decomposition,
    EmptyCurveError,
    IcaModel,
    RankError,
    RbfCurve,
    ShapeError,
    decomposition_to_csv,
    fastica_fit,
    kcurve_fit,
    kcurve_transform,
    linear_drifda,
    linear_identities,
)
from .detectors import (
    ADWIN,
    DDM,
    HDDDM,
    K2ST,
    SWIDD,
    DetectorStatus,
    FrozenLinearClassifier,
    OutOfOrderTimestamp,
)
from .stats import (
    BandwidthError,
    BinMismatch,
    PermutationCountError,
    TestResult,
    TooFewSamples,
    hellinger,
    hsic,
    hsic_test,
    median_bandwidth,
    mmd2_test,
    mutual_information,
    rbf_gram,
    time_dependency_score,
)
from .streams import (
    DATASETS,
    LabeledStream,
    NonMonotoneTime,
    ParseError,
    StreamSpec,
    TimedSample,
    UnknownDataset,
    generate,
    ingest_csv,
    read_truth,
    write_csv,
    write_truth,
)
from .theory import (
    FiniteDriftProcess,
    JointDistribution,
    NullSetError,
    TimeSubset,
    change_point,
    constant_part,
    find_alternating_pair,
    has_dependency_drift,
    has_drift,
    has_proper_drift,
    joint_of,
    model_over,
    random_process,
    verify_equivalences,
)

__version__ = "0.1.0"
