import math


def steps_per_epoch(n_samples, batch_size):
    return max(1, math.ceil(n_samples / batch_size))


def cosine_warmup_lr(step, steps_per_epoch, cfg):
    """Learning rate at optimizer step ``step``.

    Linear ramp from 0 to ``cfg.base_lr`` over the warmup steps, then a
    half-cosine that reaches 0 at ``total_epochs * steps_per_epoch``.
    """
    warmup = cfg.warmup_epochs * steps_per_epoch
    total = cfg.total_epochs * steps_per_epoch
    if step < warmup:
        return cfg.base_lr * step / warmup
    progress = min(1.0, (step - warmup) / max(1, total - warmup))
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
