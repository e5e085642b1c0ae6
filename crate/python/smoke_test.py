"""Smoke test for the h2reduce Python extension.

Build first: pip install --no-build-isolation -e crates/python
"""

import math
import os
import tempfile

import h2reduce


def main():
    full = h2reduce.gen_msd(50)
    assert (full.order, full.inputs, full.outputs) == (50, 2, 1)
    assert full.is_stable()

    hsv = h2reduce.hankel_singular_values(full)
    assert abs(hsv[4] - 0.02834) <= 0.01 * 0.02834, hsv[4]

    bt = h2reduce.bt_reduce(full, 4)
    bt_err = h2reduce.h2_error(full, bt)
    assert abs(bt_err - 0.23248) <= 0.02 * 0.23248, bt_err

    fixture = h2reduce.reference_r4_point()
    f = h2reduce.objective(full, fixture)
    assert abs(math.sqrt(f) - 0.03218) <= 1e-4, f

    point, report = h2reduce.reduce(full, 4)
    assert report.method == "riemannian"
    assert report.h2_error < bt_err
    assert report.grad_norm_final <= 1e-4
    reduced = point.to_state_space()
    assert reduced.is_stable()
    peak, _ = h2reduce.hinf_norm(reduced)
    assert peak > 0.0

    try:
        h2reduce.bt_reduce(full, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("order 0 must be rejected")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "msd.json")
        h2reduce.save_system(full, path)
        again = h2reduce.load_system(path)
        assert again.a == full.a

    print(f"ok: bt h2 {bt_err:.5f}, riemannian h2 {report.h2_error:.5f}, {report.iterations} iterations")


if __name__ == "__main__":
    main()
