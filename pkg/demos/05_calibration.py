"""Recover plate parameters from power readings."""

from blochtomo import CalibrationReading, ModelParams, calibrate, calibrate_delta_plain, forward_reading

print("lossless plate, I_LL=0.146, I_LR=0.854: delta =", calibrate_delta_plain(0.146, 0.854))
truth = ModelParams(1.3, 0.6)
reading = forward_reading(truth, i0=2.5)
print("readings:", reading)
print("recovered:", calibrate(reading), "truth:", truth)
print("circular pair only:", calibrate(CalibrationReading(i_ll=0.3, i_lr=0.7)))
