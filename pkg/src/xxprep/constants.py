"""Physical constants in the meV / ps / K unit system used throughout."""

HBAR_MEV_PS = 0.6582119569  # reduced Planck constant (meV ps)
KB_MEV_PER_K = 0.08617333262  # Boltzmann constant (meV / K)

# conversions for the deformation-potential spectral density (SI inputs)
EV_TO_JOULE = 1.602176634e-19
HBAR_SI = 1.054571817e-34  # J s
