from django import template

register = template.Library()


@register.filter
def svgnum(value, digits=2):
    """Fixed-point coordinate for SVG attributes."""
    try:
        return f"{float(value):.{int(digits)}f}"
    except (TypeError, ValueError):
        return ''


@register.filter
def offset(value, delta):
    """value + delta for template arithmetic on coordinates."""
    try:
        return float(value) + float(delta)
    except (TypeError, ValueError):
        return ''
