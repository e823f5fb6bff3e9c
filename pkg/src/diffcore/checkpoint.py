# -*- coding: utf-8 -*-
"""Checkpoint files: a JSON manifest followed by little-endian float32 data.

Layout::

    b'ADMCKPT\\x00' | uint64 LE manifest length | manifest JSON | data

The manifest maps each parameter name to its shape, dtype and byte
offset into the data block, and records the parameter count and a
format version.
"""
import json
import logging
import os
import struct

import numpy as np

from src.diffcore.store import ParamStore
from src.exceptions import CheckpointError

MAGIC = b'ADMCKPT\x00'
FORMAT_VERSION = 1
STORED_DTYPE = '<f4'

logger = logging.getLogger(__name__)


def save_checkpoint(store, path, meta=None):
    """Write every parameter of ``store`` (and ``meta``) to ``path``."""
    tensors, chunks, offset = {}, [], 0
    for name, param in store.items():
        data = np.ascontiguousarray(param.values, dtype=STORED_DTYPE)
        raw = data.tobytes()
        tensors[name] = {'shape': list(param.shape),
                         'dtype': 'float32',
                         'offset': offset,
                         'nbytes': len(raw)}
        chunks.append(raw)
        offset += len(raw)
    manifest = {'format_version': FORMAT_VERSION,
                'byte_order': 'little',
                'param_count': len(tensors),
                'value_count': store.num_parameters(),
                'tensors': tensors,
                'meta': meta or {}}
    header = json.dumps(manifest, sort_keys=True).encode('utf-8')
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<Q', len(header)))
        f.write(header)
        for raw in chunks:
            f.write(raw)
    logger.info(f'saved {len(tensors)} parameters ({offset} bytes) to {path}')


def read_checkpoint(path):
    """Parse a checkpoint file.

    :returns: (dict name -> float32 array, manifest)
    """
    if not os.path.isfile(path):
        raise CheckpointError(f'checkpoint not found: {path}')
    with open(path, 'rb') as f:
        blob = f.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f'{path} is not a checkpoint (bad magic)')
    start = len(MAGIC) + 8
    if len(blob) < start:
        raise CheckpointError(f'{path} is truncated')
    (header_len,) = struct.unpack('<Q', blob[len(MAGIC):start])
    try:
        manifest = json.loads(blob[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f'{path}: corrupt manifest ({e})') from None
    if manifest.get('format_version') != FORMAT_VERSION:
        raise CheckpointError(
            f'{path}: unsupported format version '
            f'{manifest.get("format_version")!r}')
    tensors = manifest.get('tensors', {})
    if manifest.get('param_count') != len(tensors):
        raise CheckpointError(
            f'{path}: manifest records {manifest.get("param_count")} '
            f'parameters but lists {len(tensors)}')
    data = blob[start + header_len:]
    arrays, total = {}, 0
    for name, entry in tensors.items():
        shape = tuple(entry['shape'])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        lo = entry['offset']
        if entry.get('nbytes') != nbytes or lo < 0 or lo + nbytes > len(data):
            raise CheckpointError(f'{path}: bad extent for {name!r}')
        arrays[name] = np.frombuffer(
            data, dtype=STORED_DTYPE, count=nbytes // 4, offset=lo
        ).reshape(shape).copy()
        total += arrays[name].size
    if manifest.get('value_count') != total:
        raise CheckpointError(
            f'{path}: manifest value_count {manifest.get("value_count")} '
            f'does not match stored data ({total})')
    return arrays, manifest


def load_checkpoint(store, path, prefixes=None):
    """Load ``path`` into an existing store, strictly.

    Every name in the file must exist in the store with the same shape
    and vice versa. With ``prefixes`` only names under them are compared
    and loaded; the rest of the file is ignored.

    :returns: the manifest's ``meta`` dict
    """
    arrays, manifest = read_checkpoint(path)
    store_names = set(store)
    if prefixes is not None:
        prefixes = tuple(prefixes)
        arrays = {k: v for k, v in arrays.items() if k.startswith(prefixes)}
        store_names = {k for k in store_names if k.startswith(prefixes)}
    unknown = sorted(set(arrays) - store_names)
    if unknown:
        raise CheckpointError(
            f'{path}: unknown parameters in checkpoint: {", ".join(unknown)}')
    missing = sorted(store_names - set(arrays))
    if missing:
        raise CheckpointError(
            f'{path}: parameters missing from checkpoint: '
            f'{", ".join(missing)}')
    for name, values in arrays.items():
        if values.shape != store[name].shape:
            raise CheckpointError(
                f'{path}: shape mismatch for {name!r}: file {values.shape}, '
                f'model {store[name].shape}')
    for name, values in arrays.items():
        store.assign(name, values)
    logger.info(f'loaded {len(arrays)} parameters from {path}')
    return manifest.get('meta', {})


def load_param_store(path, dtype='float32'):
    """Build a fresh ParamStore from a checkpoint file."""
    arrays, manifest = read_checkpoint(path)
    store = ParamStore(dtype)
    for name, values in arrays.items():
        store.add(name, values)
    return store, manifest.get('meta', {})
