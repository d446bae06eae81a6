from .hierarchy import common_supertype, is_subtype, subclasses
from .loader import default_stubs, parse_program, parse_stubs, validate
from .model import (
    CONSTRUCTOR,
    GENERATED_SUFFIX,
    JS_INTERFACE,
    PRIMITIVES,
    AirError,
    Assign,
    Cast,
    ClassDef,
    ConstInt,
    ConstString,
    FieldDef,
    Goto,
    IfNondet,
    InstanceGet,
    InstancePut,
    Invoke,
    Label,
    Manifest,
    MethodDef,
    New,
    Program,
    Return,
    Sig,
)
from .printer import render_class, serialize
from .localtypes import local_types
