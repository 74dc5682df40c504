"""
Stochastic finger closing
=========================

Each finger's base joint takes a random step every tick: +3 deg with
probability 0.7, -3 deg with probability 0.1, and otherwise it stays put.
The distal joint follows at a third of the base angle.
"""
import numpy as np

from mogsim import HandConfiguration, StochasticPolicy, TrialState, forward_kinematics, sample_steps, step_routine

policy = StochasticPolicy()
rng = np.random.default_rng(0)

# The step distribution and its mean
steps = sample_steps(policy, rng, 100_000)
for value, name in ((3.0, "flex"), (-3.0, "extend"), (0.0, "stay")):
    print(f"{name:>6}: {np.mean(steps == value):.3f}")
print(f"mean step {steps.mean():.3f} deg (expected {policy.expected_step:.1f})")

# Close in free space: nothing resists, so fingers walk up to the joint limit
state = TrialState(HandConfiguration(spread=60.0), rng, th_base=1.0, th_coupled=1.0)
while not state.terminated:
    state = step_routine(state, [], policy)
    if state.step % 20 == 0:
        base = ", ".join(f"{b:5.1f}" for b in state.config.base)
        print(f"step {state.step:3d}  base [{base}]  coupled {state.config.coupled[0]:5.1f}")
print(f"terminated after {state.step} steps (all fingers halted {state.counter} times)")

# Fingertip positions of the final pose, in the hand frame (mm)
hand = forward_kinematics(state.config)
for i in (1, 2, 3):
    print(f"fingertip {i}: {np.round(hand.fingertip(i), 1)}")
