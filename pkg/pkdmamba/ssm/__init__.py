from .discretize import discretize_euler, discretize_tensors, discretize_zoh
from .kernel import lti_convolve, ssm_kernel_lti
from .scan import AffineElem, combine, linear_scan, scan_parallel, scan_sequential
from .selective import SsmParams, selective_scan, selective_step_params, ssm_forward

__all__ = [
    "discretize_euler",
    "discretize_tensors",
    "discretize_zoh",
    "lti_convolve",
    "ssm_kernel_lti",
    "AffineElem",
    "combine",
    "linear_scan",
    "scan_parallel",
    "scan_sequential",
    "SsmParams",
    "selective_scan",
    "selective_step_params",
    "ssm_forward",
]
