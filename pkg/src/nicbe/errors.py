"""Exception hierarchy. Each class carries the CLI exit code for its error class."""


class NicbeError(Exception):
    exit_code = 1


class ParameterError(NicbeError):
    """Invalid sizes or arguments (n < 2, tuple index out of range, ...)."""

    exit_code = 3


class CorruptFileError(NicbeError):
    """A file failed to parse, carried an invalid group element or failed validation."""

    exit_code = 4


class SlotCollisionError(NicbeError):
    exit_code = 5


class JoinAbortError(NicbeError):
    """Join refused: the slot is occupied or the group is full."""

    exit_code = 6


class NotARecipientError(NicbeError):
    exit_code = 7


class StaleRoundError(NicbeError):
    exit_code = 8


class AuthenticationError(NicbeError):
    """AEAD tag or registry signature did not verify."""

    exit_code = 9


class ConsistencyError(NicbeError):
    """A decryption key failed the pairing consistency equation; the algorithm aborts."""

    exit_code = 10


class InvalidKeyError(NicbeError):
    """A public key failed its structural pairing checks."""

    exit_code = 11


class MembershipError(NicbeError):
    """Operation on a slot that is not occupied, or an unknown member."""

    exit_code = 12


class NotFoundError(NicbeError):
    exit_code = 13
