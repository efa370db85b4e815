import pytest

from wearnet.documented_enum import DocumentedEnum
from wearnet.models import AttentionMode, Placement, Predicate


def test_enum_member_creation():
    class Status(DocumentedEnum):
        '''Run status:\n{options}'''
        DONE = "done", "Finished successfully."
        FAILED = "failed", "Stopped with an error."

    assert Status.DONE.value == "done"
    assert Status.DONE.__doc__ == "Finished successfully."
    assert Status.FAILED.__doc__ == "Stopped with an error."
    assert Status.DONE == "done"
    assert str(Status.FAILED) == "failed"


def test_docstring_generation_with_placeholder():
    class Status(DocumentedEnum):
        '''Available options:\n{options}\nPlease choose one.'''
        ONE = "one", "First choice."
        TWO = "two", "Second choice."

    assert Status.__doc__ == "Available options:\n'one': First choice.\n'two': Second choice.\nPlease choose one."


def test_docstring_generation_without_placeholder():
    class Simple(DocumentedEnum):
        '''A simple enumeration.'''
        A = "a", "Option A."
        B = "b", "Option B."

    assert Simple.__doc__ == "A simple enumeration.\nValid options:\n'a': Option A.\n'b': Option B."


def test_choices_and_parse():
    assert AttentionMode.choices() == ["soft", "hard", "box", "none"]
    assert AttentionMode.parse("box") is AttentionMode.BOX
    with pytest.raises(ValueError, match="expected one of"):
        Placement.parse("middle")


def test_project_enums_document_their_options():
    assert "'first': A single attention unit" in Placement.__doc__
    assert "{options}" not in AttentionMode.__doc__
    for member in AttentionMode:
        assert member.__doc__ in AttentionMode.__doc__


def test_predicate_labels():
    assert Predicate.WORN.label == 1
    assert Predicate.UNWORN.label == 0
    assert Predicate.from_label(1) is Predicate.WORN
    assert Predicate.from_label(0) is Predicate.UNWORN
