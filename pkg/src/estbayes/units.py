"""Unit conventions shared by every module.

Frequencies are in MHz. Larmor/exchange evolution times are in ns, readout
and controller times in us. Diffusivities are quoted in kHz^2/us.
"""

MHZ_NS = 1e-3  # MHz * ns -> cycles
MHZ_US = 1.0  # MHz * us -> cycles
NS_PER_US = 1e3
KHZ2_TO_MHZ2 = 1e-6
MHZ2_TO_KHZ2 = 1e6

# Device-level defaults used across modules.
PROBE_TAU_STEP_NS = 4.0
GRID_F_MIN_MHZ = 10.0
GRID_F_MAX_MHZ = 160.0
GRID_BINS = 512
DEVICE_DIFFUSIVITY_KHZ2_US = 10.16**2
T1_US = 337.0
