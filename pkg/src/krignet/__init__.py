"""Scalable Gaussian-process geostatistics with amortized Vecchia likelihoods."""

from .kernel import (
    DEFAULT_ENVELOPE,
    CovarianceParams,
    Envelope,
    FullParams,
    bessel_k,
    corr_matrix,
    matern,
)
from .spatial import (
    LocationSet,
    OrderedNeighborGraph,
    build_conditioning_sets,
    build_graph,
    maxmin_order,
    scale_to_unit_square,
)
from .vecchia import (
    ExactProvider,
    KrigingSolution,
    TabulatedExactProvider,
    conditional_logpdf,
    exact_kriging,
    simulate_field,
    vecchia_loglik,
)
from .surrogate import (
    R_BINS,
    DataGenConfig,
    MlpModel,
    SurrogateBank,
    SurrogateProvider,
    TrainConfig,
    build_features,
    forward,
    generate_training_data,
    load_bank,
    save_bank,
    select_bin,
    surrogate_kriging,
    train,
    train_bank,
)
from .inference import (
    Chain,
    EssResult,
    McmcConfig,
    MleConfig,
    MleResult,
    PriorSpec,
    VariogramFit,
    ess,
    fit_mle,
    fit_variogram,
    inv_logit,
    log_prior,
    logit,
    run_mcmc,
    summarize_chain,
    update_beta,
    update_sigma2,
)
from .predict import PredictionResult, predict_bayes, predict_sites
from .diagnostics import (
    PAPER_SETTINGS,
    StudyConfig,
    StudyReport,
    run_study,
    weight_report,
)

__version__ = "0.1.0"
