# The pivot library trains classifiers whose output does not depend on a
# nuisance parameter, by pitting them against an adversary.
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Adversarial training of pivotal classifiers.

'DenseNet' is the small network engine both players are built from, with
exact gradients in the 'nn' module and the 'sgd' and 'adam' optimizers
in 'optim'.  The adversary heads (gaussian mixture or categorical) live in
'adversary'.

'ToySpec' and 'SurrogateSpec' generate datasets, held in 'SampleSet'.
'TrainConfig' drives 'pretrain_classifier' and 'adversarial_train', which
records a 'RunMetrics'.  The evaluation module measures pivotality,
entropy references and the approximate median significance.

'Config' and 'RunManifest' support the command-line front-end, which
is built on 'run_training', 'run_sweep' and 'make_report'.
"""

__version__ = '0.1'

from pivot.errors import (PivotError, RejectedInputError, ConfigurationError,
                          NumericalError, TrainingError, DatasetParseError,
                          SchemaError, EvaluationError, ReportError,
                          ManifestError)

from pivot.progress import (ProgressCallback, NullProgressBar, null_progress,
                            percent_done)

from pivot.nn import (DenseNet, init_params, forward, forward_batch,
                      loss_and_grad, save_checkpoint, load_checkpoint,
                      BCE, MDN_NLL, CAT_NLL)

from pivot.optim import (OptimizerState, new_optimizer, optimizer_step,
                         SGD, ADAM, DESCEND, ASCEND)

from pivot.adversary import (AdversaryKind, MixtureParams, CategoricalParams,
                             mixture, categorical, mdn_head, mdn_nll,
                             categorical_head, cat_nll, build_adversary)

from pivot.datagen import (Sample, SampleSet, ToySpec, SurrogateSpec,
                           generate_toy, generate_surrogate_physics,
                           write_dataset, read_dataset)

from pivot.train import (TrainConfig, RunMetrics, build_classifier,
                         sample_minibatch, pretrain_classifier,
                         adversarial_train, train_classifier, fit_adversary)

from pivot.evaluation import (ConditionalDensity, PivotalityReport,
                              conditional_score_density, pivotality_report,
                              ks_distance, entropy_gaussian,
                              estimate_h_y_given_x, ams, ams_scan)

from pivot.config import (Config)

from pivot.manifest import (RunManifest)

from pivot.pipeline import (run_training, make_report)

from pivot.sweep import (run_sweep)
