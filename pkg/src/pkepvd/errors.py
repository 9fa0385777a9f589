"""Exception types. Each maps to one CLI exit code (see ``cli``)."""


class PvdError(Exception):
    pass


class CapExceeded(PvdError):
    """A simulation would exceed a configured resource cap."""


class SupportCapExceeded(CapExceeded):
    pass


class DensityCapExceeded(CapExceeded):
    pass


class FormatError(PvdError, ValueError):
    """Malformed serialized object (file, payload, ciphertext)."""


class MalformedCiphertext(FormatError):
    pass


class PayloadDecodeError(FormatError):
    pass


class MalformedCertificate(FormatError):
    pass


class BaseDecryptionError(PvdError):
    """A well-formed base ciphertext failed to decrypt under the given key."""


class CiphertextConsumed(PvdError):
    """A quantum ciphertext was already decrypted or deleted."""
