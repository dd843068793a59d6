import typing


def is_generic(klass):
    """ Determine whether klass is a generic class """
    return hasattr(klass, '__origin__')


def is_list(klass):
    """ Determine whether klass is a List """
    return klass.__origin__ == list


def is_optional(klass):
    """ Determine whether klass is Optional[X] """
    return klass.__origin__ == typing.Union and type(None) in klass.__args__


def optional_target(klass):
    """ Return X for Optional[X] """
    return next(arg for arg in klass.__args__ if arg is not type(None))
