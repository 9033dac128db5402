"""Exception hierarchy shared by every ringtrace module."""


class RingTraceError(Exception):
    pass


class ChainError(RingTraceError, ValueError):
    """The transaction list cannot form a consistent ledger."""


class DanglingReference(ChainError):
    def __init__(self, ring_id, member):
        self.ring_id = ring_id
        self.member = member
        super().__init__(f"ring {ring_id} references unknown output {member}")


class NonMonotonicHeight(ChainError):
    def __init__(self, tx_position, height, previous, line_no=None):
        self.tx_position = tx_position
        self.height = height
        self.previous = previous
        self.line_no = line_no
        where = f"line {line_no}" if line_no is not None else f"transaction #{tx_position}"
        super().__init__(f"{where}: height {height} follows height {previous}")


class DuplicateGlobalIndex(ChainError):
    def __init__(self, global_index):
        self.global_index = global_index
        super().__init__(f"global output index {global_index} appears more than once")


class InvalidChain(ChainError):
    """Any other structural invariant violation (gaps, future references, ...)."""


class MemberNotInRing(RingTraceError, KeyError):
    def __init__(self, ring_id, member):
        self.ring_id = ring_id
        self.member = member
        super().__init__(f"output {member} is not a member of ring {ring_id}")


class UnknownRing(RingTraceError, KeyError):
    pass


class ParseError(RingTraceError, ValueError):
    pass


class MalformedLine(ParseError):
    def __init__(self, line_no, reason, path=None):
        self.line_no = line_no
        self.reason = reason
        self.path = path
        prefix = f"{path}:" if path else "line "
        super().__init__(f"{prefix}{line_no}: {reason}")


class DuplicatePayout(ParseError):
    def __init__(self, tx_id, global_index, line_no=None):
        self.tx_id = tx_id
        self.global_index = global_index
        self.line_no = line_no
        super().__init__(f"line {line_no}: duplicate payout ({tx_id}, {global_index})")


class TrueSpendNotInRing(ParseError):
    def __init__(self, ring_id, member, line_no=None):
        self.ring_id = ring_id
        self.member = member
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}true spend {member} is not a member of ring {ring_id}")


class IoFailure(RingTraceError, OSError):
    pass


class UnknownOutputIndex(RingTraceError, KeyError):
    def __init__(self, global_index):
        self.global_index = global_index
        super().__init__(f"unknown output index {global_index}")


class InfeasibleConfig(RingTraceError, ValueError):
    pass


class ContradictionDetected(UserWarning):
    """Chain reaction reached a ring whose members were all eliminated."""

    def __init__(self, ring_ids):
        self.ring_ids = tuple(ring_ids)
        super().__init__(f"{len(self.ring_ids)} ring(s) have every member eliminated")
