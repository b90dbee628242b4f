"""peft_forge: adapter fine-tuning laboratory for vision transformers."""

__version__ = "0.1.0"
