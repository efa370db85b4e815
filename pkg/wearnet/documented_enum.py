from enum import Enum
from typing import List


class DocumentedEnum(str, Enum):
    """
    String enum whose members carry a one-line description.

    Members are declared as `NAME = "value", "description"`. The class docstring gets the
    option list appended (or substituted for an `{options}` placeholder), so the same text
    serves the JSON schema and the CLI help.

    Example:
        ```python
        class AttentionMode(DocumentedEnum):
            '''How the person/clothing masks reach the backbone.\n{options}'''
            SOFT = "soft", "Attention Input added after each bottleneck's 3x3 convolution."
            HARD = "hard", "Masks concatenated with the image at the stem."
        ```
    """

    def __new__(cls, value: str, description: str):
        member = str.__new__(cls, value)
        member._value_ = value
        member.__doc__ = description
        return member

    @classmethod
    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        template = cls.__doc__ or ""
        if "{options}" in template:
            cls.__doc__ = template.replace("{options}", cls.options_text())
        else:
            cls.__doc__ = f"{template}\nValid options:\n{cls.options_text()}".lstrip("\n")

    @classmethod
    def options_text(cls) -> str:
        return "\n".join(f"'{member.value}': {member.__doc__}" for member in cls)

    @classmethod
    def choices(cls) -> List[str]:
        return [member.value for member in cls]

    @classmethod
    def parse(cls, value: str) -> "DocumentedEnum":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(
                f"'{value}' is not a valid {cls.__name__}; expected one of {cls.choices()}"
            ) from None

    def __str__(self) -> str:
        return self.value
