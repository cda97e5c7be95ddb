"""End-to-end check of the Python bindings on a small synthetic problem.

Build and run:

    maturin develop -m crates/py/Cargo.toml
    python crates/py/python/smoke_test.py
"""

import os
import sys
import tempfile

import tnn


def main():
    data = tnn.synthetic_blobs(900, 32, 3, seed=5)
    train, test = data.split(600, 300)
    train, val = train.split(500, 100)
    assert len(train) == 500 and len(val) == 100 and len(test) == 300

    teacher, history = tnn.train_teacher(train, val, [32, 12, 3], epochs=15, seed=3)
    assert history and {"epoch", "val_accuracy"} <= set(history[0])
    teacher_acc = teacher.accuracy(test)
    print(f"teacher {teacher.arch} test accuracy {teacher_acc:.3f}")

    model, summary = tnn.ternarize(teacher, train, val, probes=300, retrain_epochs=3)
    acc = model.accuracy(test)
    print(f"student {model.arch} test accuracy {acc:.3f}, sparsity {model.sparsity:.3f}")
    assert model.arch == teacher.arch
    assert 0.0 <= summary["escalated_fraction"] <= 1.0
    assert summary["neuron_report_csv"].startswith("# schema=")

    x = test.input(0)
    assert model.infer(x) == model.infer_naive(x)
    ops = model.count_ops(x)
    assert ops["muls"] == 0 and ops["popcounts"] > 0

    preds = model.predict(test)
    assert abs(sum(p == y for p, y in zip(preds, test.labels)) / len(test) - acc) < 1e-12

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "student.tnn")
        model.save(path)
        again = tnn.TernaryModel.load(path)
        assert again.to_bytes() == model.to_bytes()
        try:
            tnn.TernaryModel.load(os.path.join(tmp, "missing.tnn"))
        except OSError:
            pass
        else:
            raise AssertionError("missing file did not raise OSError")

    try:
        tnn.TernaryModel.from_bytes(b"not a model")
    except ValueError:
        pass
    else:
        raise AssertionError("garbage bytes did not raise ValueError")

    assert tnn.ternary_dot([1, -1, 0, 1], [1, 1, -1, 1]) == 1
    assert tnn.adder_width(784) == 11
    fps, latency = tnn.pipeline_cost(784, [250, 250, 250, 10])
    print(f"hwmodel 250x3: {fps:.0f} images/s, {latency * 1e6:.2f} us")
    assert abs(latency * 1e6 - 8.09) < 0.05
    assert len(tnn.reference_report().splitlines()) == 14

    print(f"tnn {tnn.__version__}: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
