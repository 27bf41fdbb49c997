from .functions import (IntervalFunction, PointFunction, SecretFunction,
                        SumFunction, truth_table)
from .shares import (BACKEND_NAIVE, BACKEND_TREE, FunctionShare,
                     deserialize_share, fss_eval, fss_eval_batch, fss_gen,
                     serialize_share)

__all__ = [
    "BACKEND_NAIVE", "BACKEND_TREE", "FunctionShare", "IntervalFunction",
    "PointFunction", "SecretFunction", "SumFunction", "deserialize_share",
    "fss_eval", "fss_eval_batch", "fss_gen", "serialize_share", "truth_table",
]
