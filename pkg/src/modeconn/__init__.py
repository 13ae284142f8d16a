"""Mode connectivity curves and Fast Geometric Ensembling on a small numpy MLP."""
from .nn import (BatchNormStats, MLPConfig, bn_recompute_stats, eval_stats, forward,
                 init_params, loss, loss_and_grad, predict_eval)
from .curves import (CurveSpec, arclength, backprop_to_bends, coefficients, init_bends,
                     make_curve, point_at)
from .curve_train import CurveTrainConfig, loss_uniform_curve, loss_uniform_t, train_curve
from .evaluation import (CurveEvalReport, PlaneGrid, curve_point_ensemble, curve_report,
                         disagreement, ensemble_predict, fit_temperature, plane_grid)
from .fge import CyclicLRSchedule, FGERunConfig, fge_chain_report, fge_run, lr_at, pretrain
from .trivial import trivial_check, trivial_path, trivial_point
from .data import (Dataset, gen_synthetic, load_checkpoint, load_csv, save_checkpoint,
                   write_report)

__version__ = "0.1.0"
