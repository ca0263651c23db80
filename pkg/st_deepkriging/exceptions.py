
class DeepKrigingError(Exception):
    pass

class ConfigurationError(DeepKrigingError):
    pass

class CapExceededError(ConfigurationError):
    pass

class ShapeError(DeepKrigingError, ValueError):
    pass

class DomainError(DeepKrigingError, ValueError):
    pass

class MissingQuantileError(DeepKrigingError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else 'missing quantile'

class ContractViolationError(DeepKrigingError):
    pass

class NumericalError(DeepKrigingError):
    pass

class IntervalCrossingError(DeepKrigingError):
    pass

class ModelNotFoundError(DeepKrigingError):
    pass

class TrainingDivergedError(DeepKrigingError):
    def __init__(self, epoch, tau=None, message=None):
        self.epoch = epoch
        self.tau = tau
        if message is None:
            message = 'training diverged (non-finite loss) at epoch {}'.format(epoch)
            if tau is not None:
                message += ' for tau={}'.format(tau)
        super().__init__(message)

class SchemaError(DeepKrigingError):
    def __init__(self, message, column=None, rows=None):
        self.column = column
        self.rows = list(rows) if rows is not None else []
        super().__init__(message)

class ExtrapolationWarning(UserWarning):
    pass
