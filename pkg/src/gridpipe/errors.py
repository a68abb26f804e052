"""Exception taxonomy for the whole platform.

Every error raised by gridpipe derives from GridPipeError. Errors that can
cross the wire carry their class name as the "error" code in JSON bodies;
the client re-raises them by that code (see service.ERROR_STATUS for the
HTTP mapping).
"""

from __future__ import annotations


class GridPipeError(Exception):
    """Base class for all gridpipe errors."""


# -- manifest parsing / validation -------------------------------------------

class ManifestSyntaxError(GridPipeError):
    """The manifest document is not well-formed JSON."""


class SchemaError(GridPipeError):
    """A manifest field is missing or mistyped; carries the offending path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownKind(GridPipeError):
    def __init__(self, shell_id: str, kind: str):
        super().__init__(f"shell {shell_id!r}: unknown algorithm kind {kind!r}")
        self.shell_id = shell_id
        self.kind = kind


class PortTypeMismatch(GridPipeError):
    def __init__(self, connection: str, expected: str, actual: str):
        super().__init__(
            f"connection {connection}: expected element type {expected}, got {actual}"
        )
        self.connection = connection
        self.expected = expected
        self.actual = actual


class BrokenChain(GridPipeError):
    """The connections do not form a single linear chain over all shells."""

    def __init__(self, shell_ids, detail: str = ""):
        ids = ", ".join(sorted(shell_ids))
        super().__init__(f"not a linear chain (shells: {ids})" + (f": {detail}" if detail else ""))
        self.shell_ids = tuple(shell_ids)


# -- algorithm library --------------------------------------------------------

class MissingParam(GridPipeError):
    def __init__(self, name: str):
        super().__init__(f"missing required parameter {name!r}")
        self.name = name


class InvalidParam(GridPipeError):
    def __init__(self, name: str, why: str):
        super().__init__(f"parameter {name!r}: {why}")
        self.name = name


class WrongElementType(GridPipeError):
    """An element sequence does not match the expected element type."""


# -- HAM runtime --------------------------------------------------------------

class UnknownBackend(GridPipeError):
    pass


class DuplicateVpId(GridPipeError):
    def __init__(self, vp_id: str):
        super().__init__(f"virtual processor id {vp_id!r} already registered")
        self.vp_id = vp_id


class UnknownVp(GridPipeError):
    def __init__(self, vp_id: str):
        super().__init__(f"no virtual processor {vp_id!r}")
        self.vp_id = vp_id


class NotIdle(GridPipeError):
    def __init__(self, vp_id: str):
        super().__init__(f"virtual processor {vp_id!r} is not idle")
        self.vp_id = vp_id


class ProcessorTypeMismatch(GridPipeError):
    def __init__(self, impl_type: str, vp_type: str):
        super().__init__(f"implementation targets {impl_type!r} but processor is {vp_type!r}")
        self.impl_type = impl_type
        self.vp_type = vp_type


class StaleLease(GridPipeError):
    """The lease was released or superseded."""


class NotConfigured(GridPipeError):
    """execute_block on a processor with no configured implementation."""


# -- deployer -----------------------------------------------------------------

class NoCompatibleImplementation(GridPipeError):
    def __init__(self, shell_id: str, available_types):
        avail = ", ".join(sorted(available_types)) or "none"
        super().__init__(
            f"shell {shell_id!r}: no implementation matches any registered "
            f"processor type (registry has: {avail})"
        )
        self.shell_id = shell_id
        self.available_types = frozenset(available_types)


class InsufficientProcessors(GridPipeError):
    def __init__(self, shell_id: str):
        super().__init__(f"shell {shell_id!r}: all compatible processors are consumed or busy")
        self.shell_id = shell_id


class VpStateChanged(GridPipeError):
    def __init__(self, vp_id: str):
        super().__init__(f"virtual processor {vp_id!r} changed state between plan and deploy")
        self.vp_id = vp_id


class WrongState(GridPipeError):
    pass


class NotRunning(WrongState):
    pass


# -- grid service / container -------------------------------------------------

class PortInUse(GridPipeError):
    pass


class BindFailure(GridPipeError):
    pass


class NameCollision(GridPipeError):
    def __init__(self, name: str):
        super().__init__(f"service name {name!r} already exposed")
        self.name = name


class InvalidName(GridPipeError):
    def __init__(self, name: str):
        super().__init__(f"invalid service name {name!r}")
        self.name = name


class NotFound(GridPipeError):
    pass


class UnknownSubscription(GridPipeError):
    pass


class SequenceGap(GridPipeError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected frame seq {expected}, got {got}")
        self.expected = expected
        self.got = got


class InputClosed(GridPipeError):
    pass


# -- client -------------------------------------------------------------------

class MalformedUrl(GridPipeError):
    pass


class Unreachable(GridPipeError):
    pass


class ProtocolError(GridPipeError):
    pass


class Timeout(GridPipeError):
    pass
