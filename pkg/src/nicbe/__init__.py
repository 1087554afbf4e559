"""Non-interactive contributory broadcast encryption over BLS12-381."""

from .algebra import G1, G2, GT, Q, count_ops, pairing, random_scalar
from .broadcast import BroadcastHeader, SealedMessage, decrypt, encrypt, open_sealed, seal
from .errors import NicbeError
from .group import GroupInfo, MemberInfo, group_join, group_leave, join, key_derive, leave, update_member
from .params import SystemParams, globe_setup, validate_params
from .registry import MemberPublicKey, MemberSecretKey, Registry, generate_key_pair

__version__ = "0.1.0"
