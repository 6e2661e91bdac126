"""codepop: exact information measures and evolutionary simulation for
populations of communicating agents under parasitic attack."""

__version__ = "0.1.0"

from .errors import (
    AbsoluteContinuityError,
    CodepopError,
    DegenerateConditioningError,
    UsageError,
    ValidationError,
)
from .probkit import (
    Dist1,
    Dist2,
    Dist3,
    NORM_TOL,
    conditional_mutual_information,
    entropy,
    js_divergence,
    kl_divergence,
    mutual_information,
)
from .popmodel import (
    Code,
    Environment,
    InteractionGraph,
    Population,
    bit_code,
    joint_agent_messages,
    joint_messages,
    joint_messages_env,
    load_snapshot,
    save_snapshot,
    synonym_shift,
    toy_code,
    validate,
)
from .metrics import (
    ComponentReport,
    DistanceMatrix,
    MeasureReport,
    ParasiteMeasures,
    StructureReport,
    analyze_structure,
    blend_kl,
    code_distance,
    code_distance_matrix,
    distance_matrix,
    env_info,
    identifiability,
    measure_report,
    missing_info,
    mutual_understanding,
    population_env_info,
    restricted_mutual_understanding,
    sensor_info,
    symbol_usage,
)
from .optimizer import (
    GAConfig,
    GenRecord,
    Genome,
    Problem,
    RunHistory,
    converged,
    crossover,
    evolve,
    mutate,
    repair,
)
from .reportkit import (
    Embedding2D,
    emit,
    mds_embed,
    read_csv,
    read_json,
    write_csv,
    write_json,
)
from .scenarios import (
    ScenarioConfig,
    ScenarioResult,
    apply_shift_probe,
    parse_scenario_config,
    run_attack,
    run_baseline,
    run_multi_parasite,
    run_response,
    run_scenario,
    run_synonym_series,
    run_toy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
