"""
Configure class attributes using values from a dictionary.

This module defines strictly typed attributes of a class, that can be loaded
from an input dictionary. Every configurable object in :mod:`gepbench` (training
settings, dataset specifications, experiment configurations) is built this way,
so that the same classes can be filled from a JSON config file, from CLI
overrides, or directly from Python.

Examples
========

In this example we set up a class describing a training run.

>>> class Run(Reader):
...
...     epochs = Property(default=200, proptype=int)
...     rate = Property(default=0.05, proptype=float, key='learning_rate')

We then extend it to also store a seed. The configuration will be successfully
inherited.

>>> class SeededRun(Run):
...
...     seed = Property(default=0, proptype=int)

Let's create a couple of objects from these classes.

>>> run1 = Run()
>>> run2 = SeededRun()

And a dictionary of replacement parameters.

>>> testdict = {'epochs': 250, 'learning_rate': 0.1, 'seed': 7}

First let's check what the default parameters are:

>>> print(run1.epochs, run1.rate)
200 0.05
>>> print(run2.epochs, run2.rate, run2.seed)
200 0.05 0

Now let's load the configuration from a dictionary:

>>> run1.read_config(testdict)
>>> run2.read_config(testdict)

Then we'll print the output to see the updated configuration:

>>> print(run1.epochs, run1.rate)
250 0.1
>>> print(run2.epochs, run2.rate, run2.seed)
250 0.1 7

Keyword arguments to the constructor are read in the same way, but unknown keys
are rejected:

>>> SeededRun(epochs=3).epochs
3
"""

import copy
import inspect
import logging

import yaml
from yaml.loader import SafeLoader


class Property:
    """Custom property descriptor that can load values from a given dict."""

    def __init__(self, default=None, proptype=None, key=None):
        """Make a new property type.

        Parameters
        ----------
        default : object
            The initial value for the property.
        proptype : function
            The type of the property. In reality this is just a function which
            gets called whenever we update the value: `val = proptype(newval)`,
            so it can be used for conversion and validation
        key : string
            The name of the dictionary key that we can fetch this value from.
            If None (default), attempt to use the attribute name from the
            class.
        """

        self.proptype = (lambda x: x) if proptype is None else proptype
        self.default = default
        self.key = key
        self.propname = None

    def __get__(self, obj, objtype):
        # Object getter.
        if obj is None:
            return None

        # Ensure the property name has been found and set
        self._set_propname(obj)

        # If the value has not been set, return the default, otherwise return the
        # actual value.
        if self.propname not in obj.__dict__:
            return self.proptype(self.default) if self.default is not None else None
        return obj.__dict__[self.propname]

    def __set__(self, obj, val):
        # Object setter.
        if obj is None:
            return

        self._set_propname(obj)
        obj.__dict__[self.propname] = self.proptype(val)

    def _from_config(self, obj, config):
        """Load the configuration from the supplied dictionary.

        Parameters
        ----------
        obj : object
            The parent object of the Property that we want to update.
        config : dict
            Dictionary of configuration values.

        Raises
        ------
        GepConfigError
            If there was an error in the config dict.
        """

        self._set_propname(obj)

        if self.key is None:
            self.key = self.propname

        if self.key in config:
            try:
                val = self.proptype(config[self.key])
            except (TypeError, ValueError) as e:
                raise GepConfigError(
                    "Can't read value of '%s' as %s: %s"
                    % (self.key, getattr(self.proptype, "__name__", self.proptype), e),
                    location=config,
                ) from e
            except GepConfigError as e:
                raise GepConfigError(
                    "Invalid value for '%s': %s" % (self.key, e.message),
                    location=config if e.line is None else e.line,
                ) from e
            obj.__dict__[self.propname] = val

    def _set_propname(self, obj):
        # The descriptor only learns its attribute name by finding itself in
        # the class hierarchy; the result is cached

        if self.propname is None:
            for basecls in inspect.getmro(type(obj))[::-1]:
                for propname, clsprop in basecls.__dict__.items():
                    if clsprop is self:
                        self.propname = propname


class Reader:
    """A class that allows the values of Properties to be assigned from a dictionary.

    Keyword arguments given to the constructor are read as a config dictionary
    with unknown keys rejected.
    """

    def __init__(self, **kwargs):
        if kwargs:
            self.read_config(kwargs, compare_keys=True)

    @classmethod
    def from_config(cls, config, *args, **kwargs):
        """Create a new instance with values loaded from config.

        Parameters
        ----------
        config : dict
            Dictionary of configuration values.
        """

        if isinstance(config, cls):
            return config

        if not isinstance(config, dict):
            raise GepConfigError(
                "Expected a block of settings for %s, got '%s'."
                % (cls.__name__, type(config).__name__)
            )

        c = cls(*args, **kwargs)
        c.read_config(config, compare_keys=True)

        return c

    @classmethod
    def _properties(cls):
        # All Property descriptors on the class hierarchy, base classes first
        props = {}
        for basecls in inspect.getmro(cls)[::-1]:
            for name, clsprop in basecls.__dict__.items():
                if isinstance(clsprop, Property):
                    props[name] = clsprop
        return props

    def read_config(self, config, compare_keys=False):
        """Set all properties in this class from the supplied config.

        Parameters
        ----------
        config : dict
            Dictionary of configuration values. Missing keys keep their
            current value.
        compare_keys : bool
            Reject keys that match no property.

        Raises
        ------
        GepConfigError
            If there was an error in the config dict.
        """

        prop_keys = set()
        for clsprop in self._properties().values():
            clsprop._from_config(self, config)
            prop_keys.add(clsprop.key)

        unused = sorted(map(str, set(config) - prop_keys))
        if compare_keys and unused:
            raise GepConfigError(
                "Unknown settings for %s: %s" % (type(self).__name__, ", ".join(unused)),
                location=config,
            )

        self._finalise_config()

    def _finalise_config(self):
        """Finish up the configuration.

        To be overridden in subclasses if we need to perform some processing
        or cross-field validation post configuration.
        """

    def to_config(self):
        """Render the current values as a plain config dictionary.

        Nested readers are rendered recursively, tuples become lists. Reading
        the result back with :meth:`from_config` gives an equal object.

        Returns
        -------
        config : dict
        """

        out = {}
        for name, clsprop in self._properties().items():
            clsprop._set_propname(self)
            key = clsprop.key if clsprop.key is not None else name
            out[key] = _plain(getattr(self, name))
        return out

    def replace(self, **kwargs):
        """Return a copy with the given properties changed.

        Raises
        ------
        GepConfigError
            If a keyword does not name a property, or the new values are invalid.
        """

        props = self._properties()
        new = copy.copy(self)
        new.__dict__ = dict(self.__dict__)
        for name, value in kwargs.items():
            if name not in props:
                raise GepConfigError(
                    "%s has no setting '%s'." % (type(self).__name__, name)
                )
            setattr(new, name, value)
        new._finalise_config()
        return new

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.to_config() == other.to_config()

    def __repr__(self):
        args = ", ".join("%s=%r" % kv for kv in sorted(self.to_config().items()))
        return "%s(%s)" % (type(self).__name__, args)


def _plain(val):
    # Convert a property value into plain config data
    if isinstance(val, Reader):
        return val.to_config()
    if isinstance(val, (list, tuple)):
        return [_plain(v) for v in val]
    if isinstance(val, dict):
        return {k: _plain(v) for k, v in val.items()}
    return val


def float_in_range(start, end, default=None, open_start=False):
    """A property type that tests if its input is within the given range.

    Parameters
    ----------
    start, end : float
        Range to test. Either may be None for no bound.
    default : `float`, optional
        The optional default value.
    open_start : bool, optional
        Exclude `start` itself from the range.

    Returns
    -------
    prop : Property
        A property instance setup to validate an input float type.

    Examples
    --------
    Should be used like::

        class Noise:

            rate = config.float_in_range(0.0, 1.0, default=0.05)
    """

    def _prop(val):

        if isinstance(val, bool):
            raise GepConfigError("Input %r is not a number" % (val,))
        val = float(val)

        low_fail = start is not None and (val <= start if open_start else val < start)
        if low_fail or (end is not None and val > end):
            raise GepConfigError(
                "Input %s not in range %s%s, %s]"
                % (val, "(" if open_start else "[", start, end)
            )

        return val

    prop = Property(proptype=_prop, default=default)

    return prop


def int_in_range(start, end=None, default=None):
    """A property type accepting integers within an inclusive range.

    Parameters
    ----------
    start : int
        Smallest accepted value.
    end : int, optional
        Largest accepted value. No upper bound if `None`.
    default : int, optional
        The optional default value.

    Returns
    -------
    prop : Property
    """

    def _prop(val):

        if isinstance(val, bool) or not float(val).is_integer():
            raise GepConfigError("Input %r is not an integer" % (val,))
        val = int(val)

        if val < start or (end is not None and val > end):
            raise GepConfigError("Input %d not in range [%s, %s]" % (val, start, end))

        return val

    return Property(proptype=_prop, default=default)


def enum(options, default=None):
    """A property type that accepts only a set of possible values.

    Parameters
    ----------
    options : list
        List of allowed options.
    default : optional
        The optional default value.

    Returns
    -------
    prop : Property
        A property instance setup to validate an enum type.

    Raises
    ------
    ValueError
        If the default value is not part of the options.

    Examples
    --------
    Should be used like::

        class Shift:

            kind = enum(['near', 'far'], default='near')
    """

    def _prop(val):

        if val not in options:
            raise GepConfigError(f"Input {val} not in {list(options)}")

        return val

    if default is not None and default not in options:
        raise ValueError(f"Default value {default} must be in {options} (or None)")

    prop = Property(proptype=_prop, default=default)

    return prop


def list_type(type_=None, length=None, minlength=None, options=None, default=None):
    """A property type holding a list.

    Parameters
    ----------
    type_ : type, optional
        Required type of every item. Booleans only pass if `type_` is `bool`.
    length : int, optional
        Exact required length.
    minlength : int, optional
        Minimum length.
    options : list, optional
        If set, every item must be one of these.
    default : list, optional
        Checked against the same rules when the property is declared.

    Returns
    -------
    prop : Property

    Raises
    ------
    ValueError
        If the default value fails validation.

    Examples
    --------
    Should be used like::

        class Sweep:

            sizes = list_type(int, minlength=1, default=[2, 4])
    """

    def _prop(val):

        if not isinstance(val, (list, tuple)):
            raise GepConfigError(f"Expected a list, got {val!r}.")

        for ii, item in enumerate(val):
            if type_ is not None and (
                not isinstance(item, type_) or (isinstance(item, bool) and type_ is not bool)
            ):
                raise GepConfigError(
                    f"Item {ii} ({item!r}) is a {type(item).__name__}, "
                    f"expected {type_.__name__}."
                )
            if options is not None and item not in options:
                raise GepConfigError(f"Item {ii} ({item!r}) not in {list(options)}.")

        if length is not None and len(val) != length:
            raise GepConfigError(f"Expected {length} items, got {len(val)}.")

        if minlength is not None and len(val) < minlength:
            raise GepConfigError(f"Expected at least {minlength} items, got {len(val)}.")

        return list(val)

    if default is not None:
        try:
            _prop(default)
        except GepConfigError as e:
            raise ValueError(f"Default {default!r} is not a valid value: {e}") from e

    return Property(proptype=_prop, default=default)


def section(reader_cls, default=None):
    """A property holding a nested block of settings.

    Parameters
    ----------
    reader_cls : subclass of Reader
        The class the block is read into.
    default : dict, optional
        Default settings for the block. Empty (all defaults) if not set.

    Returns
    -------
    prop : Property
    """

    return Property(
        proptype=reader_cls.from_config, default={} if default is None else default
    )


def section_list(reader_cls, default=None, minlength=None):
    """A property holding a list of nested blocks of settings.

    Parameters
    ----------
    reader_cls : subclass of Reader
        The class each block is read into.
    default : list of dict, optional
        Default blocks.
    minlength : int, optional
        Minimum number of blocks.

    Returns
    -------
    prop : Property
    """

    def _prop(val):
        if not isinstance(val, (list, tuple)):
            raise GepConfigError(
                "Expected a list of %s blocks, but got '%r'." % (reader_cls.__name__, val)
            )
        if minlength and len(val) < minlength:
            raise GepConfigError(
                "Expected at least %i %s blocks, got %i."
                % (minlength, reader_cls.__name__, len(val))
            )
        return [reader_cls.from_config(v) for v in val]

    return Property(proptype=_prop, default=default)


LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "NOTSET")


def logging_config(default=None):
    """A property holding log levels per logger.

    A plain string sets the root level. A block maps logger names (``root``
    included) to levels. Level names are case insensitive.

    Parameters
    ----------
    default : str or dict, optional
        Empty (leave logging alone) if not set.

    Returns
    -------
    prop : Property

    Examples
    --------
    Should be used like::

        class Experiment:

            logging = logging_config({"root": "INFO", "gepbench.nn": "WARNING"})
    """

    def _prop(val):
        if isinstance(val, str):
            val = {"root": val}
        elif not isinstance(val, dict):
            raise GepConfigError(
                f"Expected a level name or a block of levels for 'logging', "
                f"got {type(val).__name__}."
            )

        levels = {}
        for name, level in val.items():
            level = str(level).upper()
            if level not in LOG_LEVELS:
                raise GepConfigError(
                    f"Unknown log level {level!r} for {name}, expected one of {list(LOG_LEVELS)}."
                )
            levels[str(name)] = level
        return levels

    return Property(proptype=_prop, default={} if default is None else default)


def setup_logging(levels, verbosity=0):
    """Apply a validated logging config.

    Parameters
    ----------
    levels : dict
        Log levels per module as produced by :func:`logging_config`. The key
        "root" sets the root level.
    verbosity : int
        Each step lowers the root level by one (WARNING -> INFO -> DEBUG).
    """
    loglvl_root = getattr(logging, levels.get("root", "WARNING"))
    if verbosity:
        loglvl_root = max(logging.DEBUG, loglvl_root - 10 * verbosity)

    logging.basicConfig(level=loglvl_root)
    logging.getLogger().setLevel(loglvl_root)
    for module, level in levels.items():
        if module != "root":
            logging.getLogger(module).setLevel(getattr(logging, level))


class _line_dict(dict):
    """A private dict subclass that also stores line numbers for debugging."""

    __line__ = None


class SafeLineLoader(SafeLoader):
    """
    YAML loader that tracks line numbers.

    Adds the line number information to every mapping block. JSON documents
    parse with it too, so config files written as JSON get line numbers in
    their error messages.
    """

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping = _line_dict(mapping)

        # Add 1 so numbering starts at 1
        mapping.__line__ = node.start_mark.line + 1
        return mapping


def load_file(file_name):
    """Read a config file into a dictionary with line information.

    Parameters
    ----------
    file_name : str or path
        A JSON (or YAML) config document.

    Returns
    -------
    config : dict

    Raises
    ------
    GepConfigError
        If the file is missing, unparseable or not a mapping.
    """
    try:
        with open(file_name) as f:
            doc = f.read()
    except OSError as e:
        raise GepConfigError(
            "Unable to open config file ({}): {}".format(file_name, e.strerror),
            file_=file_name,
        ) from e

    try:
        params = yaml.load(doc, Loader=SafeLineLoader)
    except yaml.YAMLError as e:
        raise GepConfigError(
            "Config file ({}) is not valid JSON: {}".format(file_name, e),
            file_=file_name,
        ) from e

    if not isinstance(params, dict):
        raise GepConfigError(
            "Config file ({}) must hold a single object at the top level.".format(
                file_name
            ),
            file_=file_name,
        )
    return params


class GepConfigError(Exception):
    """
    There was an error in the configuration.

    Parameters
    ==========
    message : str
        Message / description of error
    file_ : str
        Configuration file name (optional)
    location : dict
        If :class:`SafeLineLoader` is used, a dict created by that can be
        passed in here to report the line number where the error occurred. An
        int is taken as the line number directly.
    """

    def __init__(self, message, file_=None, location=None):
        self.message = message
        self.file = file_
        if isinstance(location, _line_dict):
            self.line = location.__line__
        elif isinstance(location, int):
            self.line = location
        else:
            self.line = None
        super().__init__(message)

    def __str__(self):
        location = ""
        if self.line is not None:
            location = "\nError in block starting at L{}".format(self.line)
            if self.file is not None:
                location = "{} ({})".format(location, self.file)
        elif self.file is not None:
            location = " ({})".format(self.file)
        return "{}{}".format(self.message, location)


if __name__ == "__main__":
    import doctest

    doctest.testmod()
