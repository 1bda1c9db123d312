"""Dense linear algebra and chi-square distribution helpers."""

from collab_score.numerics.chi2 import chi2_quantile, chi2_sf, noncentral_chi2_sf
from collab_score.numerics.linalg import SymEig, inv_psd, inv_sqrt_psd, null_space_affine, sym_eig

__all__ = [
    "SymEig",
    "chi2_quantile",
    "chi2_sf",
    "inv_psd",
    "inv_sqrt_psd",
    "noncentral_chi2_sf",
    "null_space_affine",
    "sym_eig",
]
