"""Report rendering: aligned text, tab-delimited key-value files, figures."""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

GOLDEN = (1 + 5 ** 0.5) / 2


def _new_figure(width=6.0):
    fig, ax = plt.subplots(figsize=(width, width / GOLDEN))
    return fig, ax


def report_rows(features, config, counts, score):
    """Ordered key-value rows mirroring the usual results-table columns."""
    return {
        "features": features,
        "conv_layers": len(config.stages),
        "conv_params": counts.conv_weights,
        "classifier": config.classifier.kind,
        "classifier_params": counts.classifier_weights,
        "per": score.per,
        "frame_accuracy": score.frame_accuracy,
        "substitutions": score.substitutions,
        "deletions": score.deletions,
        "insertions": score.insertions,
    }


def format_report_text(rows) -> str:
    width = max(len(key) for key in rows)
    lines = [f"{key.ljust(width)}  {value}" for key, value in rows.items()]
    return "\n".join(lines) + "\n"


def format_report_tsv(rows) -> str:
    return "".join(f"{key}\t{value}\n" for key, value in rows.items())


def write_report(out_dir_txt, out_dir_tsv, rows) -> None:
    with open(out_dir_txt, "w", encoding="utf-8") as handle:
        handle.write(format_report_text(rows))
    with open(out_dir_tsv, "w", encoding="utf-8") as handle:
        handle.write(format_report_tsv(rows))


def save_training_curves(log, path) -> None:
    """Mean train log-likelihood and validation accuracy per epoch."""
    epochs = [entry.epoch for entry in log]
    fig, ax = _new_figure()
    ax.plot(epochs, [entry.train_loglik for entry in log],
            marker="o", color="tab:blue", label="train log-likelihood")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean train log-likelihood", color="tab:blue")
    twin = ax.twinx()
    twin.plot(epochs, [entry.valid_accuracy for entry in log],
              marker="s", color="tab:red", label="valid accuracy")
    twin.set_ylabel("validation frame accuracy", color="tab:red")
    twin.set_ylim(0.0, 1.0)
    ax.set_title("training progress")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_confusion(matrix, path) -> None:
    matrix = np.asarray(matrix)
    fig, ax = _new_figure(5.0)
    image = ax.imshow(matrix, cmap="Blues")
    ax.set_xlabel("predicted class")
    ax.set_ylabel("reference class")
    ax.set_title("frame confusion")
    fig.colorbar(image, ax=ax, label="frames")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_score_summary(rows, path) -> None:
    fig, ax = _new_figure(5.0)
    names = ["frame accuracy", "PER"]
    values = [rows["frame_accuracy"], rows["per"]]
    bars = ax.bar(names, values, color=["tab:green", "tab:orange"])
    for bar, value in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(),
                f"{value:.3f}", ha="center", va="bottom")
    ax.set_ylim(0, max(1.0, max(values) * 1.2))
    ax.set_title(f"{rows['features']} features, "
                 f"{rows['conv_layers']} filter stages, "
                 f"{rows['classifier']} head")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grid_scatter(results, path) -> None:
    """Validation accuracy against weight count for every grid candidate."""
    fig, ax = _new_figure()
    totals = [result.total_weights for result in results]
    accuracies = [result.valid_accuracy for result in results]
    ax.scatter(totals, accuracies, color="tab:blue")
    for i, (x, y) in enumerate(zip(totals, accuracies)):
        ax.annotate(str(i), (x, y), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xscale("log")
    ax.set_xlabel("weights")
    ax.set_ylabel("validation frame accuracy")
    ax.set_title("grid candidates")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
