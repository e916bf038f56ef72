"""Command-line entry point wiring all modules into one workflow.

Exit codes: 0 success, 2 validation or usage error, 3 I/O or file-format
error, 4 equivalence verification failure. Output files are written via
temp-file-plus-rename, so a failing command never leaves partial output.
"""

from __future__ import annotations

import functools
import glob
import json
import os
import sys

import click

from . import __version__
from .crypto import (
    SHUFFLE_MODES,
    EncryptionParams,
    decrypt_vit,
    encrypt_pixel_based,
    encrypt_vit,
)
from .dataset import (
    MappingTable,
    default_mapping,
    read_label_listing,
    read_manifest,
    remap_labels,
    split,
    summarize,
    write_manifest,
)
from .errors import CloakVitError, FileFormatError, ValidationError, VerificationError
from .permkey import SecretKey
from .raster import read_png, write_png
from .transform import keyspace_bits, transform_model, verify_equivalence
from .vit import forward
from .weights_io import load_weights, save_weights, weights_summary

KEY_ENV_VAR = "CLOAKVIT_KEY"


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VerificationError as exc:
            _fail(4, str(exc))
        except FileFormatError as exc:
            _fail(3, str(exc))
        except ValidationError as exc:
            _fail(2, str(exc))
        except CloakVitError as exc:
            _fail(2, str(exc))
        except BrokenPipeError:
            # downstream consumer (e.g. `| head`) closed the pipe; not an error
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
            sys.exit(0)
        except OSError as exc:
            _fail(3, str(exc))

    return wrapper


def resolve_key(key_path: str | None) -> SecretKey:
    """Key file from --key; otherwise the hex key from $CLOAKVIT_KEY."""
    if key_path is not None:
        return SecretKey.read(key_path)
    env = os.environ.get(KEY_ENV_VAR)
    if env:
        return SecretKey.from_hex(env)
    raise ValidationError(f"no key: pass --key or set {KEY_ENV_VAR}")


key_option = click.option(
    "--key", "key_path", type=click.Path(), default=None,
    help=f"Key file (64 hex chars); ${KEY_ENV_VAR} is used when omitted.",
)


@click.group()
@click.version_option(version=__version__, prog_name="cloakvit")
def main() -> None:
    """Keyed block-wise image encryption with matching ViT model transforms."""


@main.command()
@click.option("-o", "--output", type=click.Path(), default=None, help="Key file to write.")
@click.option("--seed", type=int, default=None, help="Derive the key deterministically (tests only).")
@handle_errors
def keygen(output: str | None, seed: int | None) -> None:
    """Generate a 256-bit key (OS entropy unless --seed is given)."""
    key = SecretKey.generate() if seed is None else SecretKey.from_seed(seed)
    if output is None:
        click.echo(key.hex())
    else:
        key.write(output)
        click.echo(f"wrote {output}")


@main.command()
@key_option
@click.option("--block-size", default=16, show_default=True, help="Block side length M.")
@click.option("--mode", type=click.Choice(SHUFFLE_MODES), default="mixed", show_default=True)
@click.option(
    "--scheme", type=click.Choice(["vit", "pixel-based"]), default="vit", show_default=True,
    help="Block-wise cipher or the conventional pixel-value baseline.",
)
@click.option("--dir", "in_dir", type=click.Path(), default=None, help="Encrypt every PNG in a directory.")
@click.option("--out-dir", type=click.Path(), default=None, help="Output directory for --dir.")
@click.argument("input_path", type=click.Path(), required=False)
@click.argument("output_path", type=click.Path(), required=False)
@handle_errors
def encrypt(key_path, block_size, mode, scheme, in_dir, out_dir, input_path, output_path) -> None:
    """Encrypt IN.png to OUT.png (or a whole directory with --dir)."""
    key = resolve_key(key_path)
    params = EncryptionParams(block_size=block_size, mode=mode)

    def one(src: str, dst: str) -> None:
        img = read_png(src)
        out = encrypt_pixel_based(img, key) if scheme == "pixel-based" else encrypt_vit(img, key, params)
        write_png(out, dst)

    for src, dst in _io_pairs(in_dir, out_dir, input_path, output_path):
        one(src, dst)
        click.echo(f"{src} -> {dst}")


@main.command()
@key_option
@click.option("--block-size", default=16, show_default=True)
@click.option("--mode", type=click.Choice(SHUFFLE_MODES), default="mixed", show_default=True)
@click.option("--dir", "in_dir", type=click.Path(), default=None, help="Decrypt every PNG in a directory.")
@click.option("--out-dir", type=click.Path(), default=None)
@click.argument("input_path", type=click.Path(), required=False)
@click.argument("output_path", type=click.Path(), required=False)
@handle_errors
def decrypt(key_path, block_size, mode, in_dir, out_dir, input_path, output_path) -> None:
    """Invert the block-wise encryption of IN.png into OUT.png."""
    key = resolve_key(key_path)
    params = EncryptionParams(block_size=block_size, mode=mode)
    for src, dst in _io_pairs(in_dir, out_dir, input_path, output_path):
        write_png(decrypt_vit(read_png(src), key, params), dst)
        click.echo(f"{src} -> {dst}")


def _io_pairs(in_dir, out_dir, input_path, output_path) -> list[tuple[str, str]]:
    if in_dir is not None:
        if out_dir is None:
            raise ValidationError("--dir requires --out-dir")
        if input_path or output_path:
            raise ValidationError("--dir cannot be combined with positional files")
        sources = sorted(glob.glob(os.path.join(in_dir, "*.png")))
        if not sources:
            raise ValidationError(f"no .png files in {in_dir}")
        os.makedirs(out_dir, exist_ok=True)
        return [(src, os.path.join(out_dir, os.path.basename(src))) for src in sources]
    if not input_path or not output_path:
        raise ValidationError("pass INPUT and OUTPUT files, or --dir with --out-dir")
    return [(input_path, output_path)]


@main.command("transform-model")
@key_option
@click.option("--mode", type=click.Choice(SHUFFLE_MODES), default="mixed", show_default=True)
@click.argument("input_path", type=click.Path())
@click.argument("output_path", type=click.Path())
@handle_errors
def transform_model_cmd(key_path, mode, input_path, output_path) -> None:
    """Re-index IN.vtw for the key, writing OUT.vtw (block size = patch size)."""
    key = resolve_key(key_path)
    model, cfg = load_weights(input_path)
    params = EncryptionParams(block_size=cfg.patch_size, mode=mode)
    save_weights(transform_model(model, cfg, key, params), cfg, output_path)
    click.echo(f"{input_path} -> {output_path}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True, help=".vtw weights file.")
@click.option("--image", "image_path", type=click.Path(), required=True, help="Input PNG.")
@click.option("--labels", "labels_path", type=click.Path(), default=None,
              help="Text file with one class name per line.")
@click.option("--json", "as_json", is_flag=True, help="Emit a machine-readable record.")
@handle_errors
def infer(model_path, image_path, labels_path, as_json) -> None:
    """Classify an image; works identically on plain and encrypted inputs."""
    model, cfg = load_weights(model_path)
    logits = forward(model, cfg, read_png(image_path))
    index = int(logits.argmax())
    name = None
    if labels_path is not None:
        with open(labels_path, "r", encoding="utf-8") as fh:
            names = [line.strip() for line in fh if line.strip()]
        if len(names) != cfg.num_classes:
            raise ValidationError(
                f"label file has {len(names)} names, model has {cfg.num_classes} classes"
            )
        name = names[index]
    if as_json:
        record = {
            "schema": 1,
            "model": model_path,
            "image": image_path,
            "class_index": index,
            "class_name": name,
            "logits": [float(v) for v in logits],
        }
        click.echo(json.dumps(record))
    else:
        click.echo(f"class index: {index}")
        if name is not None:
            click.echo(f"class name:  {name}")
        click.echo("logits:      " + " ".join(f"{v:.6f}" for v in logits))


@main.command("verify-equivalence")
@key_option
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--image", "image_path", type=click.Path(), required=True)
@click.option("--trials", default=1, show_default=True, help="Extra keys derived from the given one.")
@click.option("--mode", type=click.Choice(SHUFFLE_MODES), default="mixed", show_default=True)
@click.option("--tolerance", default=1e-5, show_default=True)
@handle_errors
def verify_equivalence_cmd(key_path, model_path, image_path, trials, mode, tolerance) -> None:
    """Check that encrypted-domain logits match plain logits."""
    key = resolve_key(key_path)
    model, cfg = load_weights(model_path)
    img = read_png(image_path)
    params = EncryptionParams(block_size=cfg.patch_size, mode=mode)
    report = verify_equivalence(
        model, cfg, key, img, params=params, trials=trials, tolerance=tolerance
    )
    click.echo(f"trials:            {len(report.trials)}")
    click.echo(f"max |delta logit|: {report.max_abs_delta:.3e}")
    click.echo(f"argmax agreement:  {report.argmax_agreement * 100:.1f}%")
    if not report.passed:
        raise VerificationError(
            f"equivalence violated: max |delta logit| {report.max_abs_delta:.3e} "
            f"exceeds {tolerance:.1e} or the predicted class changed"
        )
    click.echo("equivalence holds")


@main.command()
@click.option("--block-size", default=16, show_default=True)
@click.option("--image-size", default=224, show_default=True)
@click.option("--mode", type=click.Choice(SHUFFLE_MODES), default="mixed", show_default=True)
@handle_errors
def keyspace(block_size, image_size, mode) -> None:
    """Print the base-2 log of the cipher's key-space size."""
    params = EncryptionParams(block_size=block_size, mode=mode)
    bits = keyspace_bits(image_size, params)
    click.echo(f"log2 key space: {bits:.6f} bits")


@main.command("weights-info")
@click.option("--json", "as_json", is_flag=True)
@click.argument("model_path", type=click.Path())
@handle_errors
def weights_info(as_json, model_path) -> None:
    """Show config, tensor table, and parameter count of a .vtw file."""
    info = weights_summary(model_path)
    if as_json:
        click.echo(json.dumps(info, indent=2))
        return
    click.echo(f"file:        {model_path}")
    for field, value in info["config"].items():
        click.echo(f"  {field}: {value}")
    click.echo(f"parameters:  {info['param_count']:,}")
    click.echo("tensors:")
    for name, shape in info["tensors"]:
        click.echo(f"  {name:<28} {shape}")


@main.group()
def dataset() -> None:
    """Manifest tooling: remap labels, split, summarize."""


@dataset.command()
@click.option("--mapping", "mapping_path", type=click.Path(), default=None,
              help="JSON mapping table; the built-in DeepFashion table when omitted.")
@click.option("--unmatched", type=click.Choice(["error", "skip"]), default="error", show_default=True)
@click.argument("input_path", type=click.Path())
@click.argument("output_path", type=click.Path())
@handle_errors
def remap(mapping_path, unmatched, input_path, output_path) -> None:
    """Map IN.tsv (path<TAB>label) to a four-class manifest OUT.tsv."""
    table = (
        default_mapping(unmatched=unmatched)
        if mapping_path is None
        else MappingTable.load(mapping_path, unmatched=unmatched)
    )
    entries, report = remap_labels(read_label_listing(input_path), table)
    write_manifest(entries, output_path)
    click.echo(f"mapped {report.total} entries -> {output_path}")
    click.echo("per-class counts: " + " ".join(str(c) for c in report.class_counts))
    if report.skipped:
        click.echo(
            f"skipped {report.skipped} entries with unmatched labels: "
            + ", ".join(report.unmatched_labels)
        )


@dataset.command("split")
@click.option("--fraction", default=0.8, show_default=True, help="Training fraction.")
@click.option("--seed", default=0, show_default=True)
@click.option("--train-out", type=click.Path(), required=True)
@click.option("--test-out", type=click.Path(), required=True)
@click.argument("input_path", type=click.Path())
@handle_errors
def split_cmd(fraction, seed, train_out, test_out, input_path) -> None:
    """Deterministically split a manifest into train and test manifests."""
    entries = read_manifest(input_path)
    train, test = split(entries, fraction, seed)
    write_manifest(train, train_out)
    write_manifest(test, test_out)
    click.echo(f"train: {len(train)} entries -> {train_out}")
    click.echo(f"test:  {len(test)} entries -> {test_out}")


@dataset.command("summarize")
@click.option("--json", "as_json", is_flag=True)
@click.argument("input_path", type=click.Path())
@handle_errors
def summarize_cmd(as_json, input_path) -> None:
    """Per-class counts and shares, next to the published reference counts."""
    summary = summarize(read_manifest(input_path))
    if as_json:
        click.echo(json.dumps(summary.to_dict(), indent=2))
    else:
        click.echo(summary.to_text())


if __name__ == "__main__":
    main()
