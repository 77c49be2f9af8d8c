from .config import (
    StudyConfig,
    ConfigError,

    load_config,
    validate_config,
    from_dict,
    to_dict
)

from .study import (
    run_study,
    StudyResult
)

from .reports import emit_reports
