import hashlib
import typing

from agediffusion import typing_utils
from agediffusion.exceptions import ConfigError

TRUTHY = ('true', '1', 'yes', 'on')
FALSY = ('false', '0', 'no', 'off', '')


def parse_flag(value) -> bool:
    """Parses a feature-flag style boolean.

    Accepts the same spellings as environment flags: 'true', '1', 'yes',
    'on' (any case) are true, 'false', '0', 'no', 'off' and '' are false.

    :param value: str or bool.
    :return: bool.
    """
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in TRUTHY:
        return True
    if text in FALSY:
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _deserialize(data, klass):
    """Deserializes a raw config value into an object.

    :param data: str, list, or an already typed value.
    :param klass: class literal, or typing generic.

    :return: object.
    """
    if data is None:
        return None

    if klass is bool:
        return parse_flag(data)
    if klass in (int, float, str, bytearray):
        return _deserialize_primitive(data, klass)
    elif typing_utils.is_generic(klass):
        if typing_utils.is_optional(klass):
            if isinstance(data, str) and data.strip().lower() in ('', 'none'):
                return None
            return _deserialize(data, typing_utils.optional_target(klass))
        if typing_utils.is_list(klass):
            return _deserialize_list(data, klass.__args__[0])
    return deserialize_model(data, klass)


def _deserialize_primitive(data, klass):
    """Deserializes to primitive type.

    :param data: data to deserialize.
    :param klass: class literal.

    :return: int, float, str.
    :rtype: int | float | str
    """
    if isinstance(data, str):
        data = data.strip()
    try:
        if klass is int and isinstance(data, str):
            # "30.0" and "1e5" are accepted for integer fields when exact
            number = float(data)
            if not number.is_integer():
                raise ValueError(data)
            return int(number)
        return klass(data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"cannot read {data!r} as {klass.__name__}") from e


def deserialize_model(data, klass):
    """Deserializes a dict of raw values to model.

    Keys may be either config keys (``attribute_map`` values) or attribute
    names. Unknown keys are rejected.

    :param data: dict.
    :type data: dict
    :param klass: class literal.
    :return: model object.
    """
    instance = klass()

    if not instance.field_types:
        return data

    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping for {klass.__name__}")

    by_key = {instance.attribute_map[attr]: attr for attr in instance.field_types}
    for key, value in data.items():
        attr = by_key.get(key, key if key in instance.field_types else None)
        if attr is None:
            raise ConfigError(f"unknown {klass.__name__} key: {key!r}")
        setattr(instance, attr, _deserialize(value, instance.field_types[attr]))

    return instance


def _deserialize_list(data, boxed_type):
    """Deserializes a list and its elements.

    Comma separated strings are split first.

    :param data: list or str to deserialize.
    :type data: list | str
    :param boxed_type: class literal.

    :return: deserialized list.
    :rtype: list
    """
    if isinstance(data, str):
        data = [item for item in data.split(',') if item.strip()]
    return [_deserialize(sub_data, boxed_type)
            for sub_data in data]


def derive_seed(rng_seed: int, stream: str) -> int:
    """Derives the seed of a named random stream from the global seed.

    The seed is the first 8 bytes of sha256("<rng_seed>:<stream>") read as
    an unsigned big-endian integer, so one integer reproduces every stream.

    :param rng_seed: global experiment seed.
    :param stream: stream name, e.g. "split" or "synth.edges".
    :return: int in [0, 2**64).
    """
    digest = hashlib.sha256(f"{int(rng_seed)}:{stream}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sha256_file(path) -> str:
    """Hex sha256 of a file, read in 1 MiB chunks"""
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            h.update(chunk)
    return h.hexdigest()


def read_key_value_file(path) -> typing.Dict[str, str]:
    """Reads a ``key = value`` config file.

    Blank lines and lines starting with '#' are skipped.

    :param path: config file path.
    :return: dict of raw string values.
    """
    values = {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith('#'):
                    continue
                if '=' not in stripped:
                    raise ConfigError(f"{path}:{line_number}: expected key = value")
                key, value = stripped.split('=', 1)
                values[key.strip().replace('-', '_')] = value.strip()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return values
