"""
The discrete picture: balanced softmax and statistical conversion
=================================================================

With finitely many labels the conversion between the training posterior and
the balanced posterior is a reweighting by the training prior. Balanced
softmax trains on that converted posterior by adding log prior to the logits.
"""
import numpy as np

from balanced_mse import DiscretePrior, balanced_softmax_nll, statistical_conversion

p_train = np.array([0.7, 0.2, 0.1])
p_bal_given_x = np.array([0.2, 0.3, 0.5])

p_train_given_x = statistical_conversion(p_bal_given_x, p_train)
print("balanced posterior      ", p_bal_given_x)
print("training posterior      ", np.round(p_train_given_x, 4))

# The reverse conversion divides the prior back out.
back = statistical_conversion(p_train_given_x, 1.0 / p_train)
print("converted back          ", np.round(back, 4))

# Logits equal to log p_bal give the training posterior after the shift.
prior = DiscretePrior.from_counts([700, 200, 100])
for c in range(3):
    ev = balanced_softmax_nll(np.log(p_bal_given_x), c, prior)
    print(f"class {c}: nll {ev.value:.4f}  = -log {np.exp(-ev.value):.4f}")
