from .structure import (
    DbnError,
    DbnStructure,

    ALGORITHMS,
    PC_STABLE,
    MMHC,
    SI_HITON,

    read_arc_list
)

from .sliced import (
    SlicedDataset,
    make_sliced
)

from .citest import (
    ci_test_fisher_z,
    FisherZTest
)

from .learning import (
    learn_pc_stable,
    learn_mmhc,
    learn_si_hiton_pc,
    LEARNERS
)

from .scoring import (
    score_aic,
    select_structure
)

from .model import (
    DbnModel,
    DbnForecaster,
    fit_linear_gaussian,
    forecast_one_day
)
