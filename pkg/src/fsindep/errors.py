class FsiError(Exception):
    """Domain error: the inputs are outside what the mathematics allows."""


class BudgetExceeded(FsiError):
    """A search or enumeration cap was hit before an answer was found."""


class TapeExhausted(FsiError):
    def __init__(self, tape: int, position: int):
        super().__init__(f"tape {tape} exhausted: symbol {position} requested")
        self.tape = tape
        self.position = position
