from django import forms
from django.conf import settings

from taylor.exceptions import ExpressionSyntaxError
from taylor.services.function_model import parse

MODE_CHOICES = (("factored", "factored"), ("direct", "direct"))

PUBLISHED_KEYS = ("published_roots", "published_max_delta_r", "published_delta_t",
                  "published_delta_cs", "published_b_u", "published_xz")


def _float_list(raw, field):
    raw = (raw or "").strip()
    if not raw:
        return ()
    try:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise forms.ValidationError(f"{field}: expected a comma-separated list of numbers.")


class ExperimentConfigForm(forms.Form):
    function = forms.CharField(label="y(x)", max_length=2000)
    label = forms.CharField(required=False, max_length=200)
    lo = forms.FloatField(label="Interval start")
    hi = forms.FloatField(label="Interval end")
    x0 = forms.FloatField(label="Expansion point")
    xz_offset = forms.FloatField(required=False)
    n_steps = forms.IntegerField(required=False, min_value=10)
    seeds = forms.CharField(required=False)
    search_lo = forms.FloatField(required=False)
    search_hi = forms.FloatField(required=False)
    switch_points = forms.CharField(required=False)
    mode = forms.ChoiceField(choices=MODE_CHOICES, required=False)
    output_dir = forms.CharField(required=False)
    spline_guard_steps = forms.IntegerField(required=False, min_value=0)
    published_roots = forms.CharField(required=False)
    published_max_delta_r = forms.CharField(required=False)
    published_delta_t = forms.FloatField(required=False)
    published_delta_cs = forms.FloatField(required=False)
    published_b_u = forms.FloatField(required=False)
    published_xz = forms.FloatField(required=False)

    def clean_function(self):
        text = self.cleaned_data.get("function", "")
        try:
            parse(text)
        except ExpressionSyntaxError as exc:
            raise forms.ValidationError(str(exc))
        return text

    def clean_seeds(self):
        return _float_list(self.cleaned_data.get("seeds"), "seeds")

    def clean_published_roots(self):
        return _float_list(self.cleaned_data.get("published_roots"), "published_roots")

    def clean_published_max_delta_r(self):
        return _float_list(self.cleaned_data.get("published_max_delta_r"), "published_max_delta_r")

    def clean_switch_points(self):
        raw = (self.cleaned_data.get("switch_points") or "").strip()
        if raw.lower() == "auto":
            return "auto"
        return _float_list(raw, "switch_points")

    def clean_xz_offset(self):
        v = self.cleaned_data.get("xz_offset")
        if v is not None and v <= 0:
            raise forms.ValidationError("xz_offset must be positive.")
        return v

    def clean(self):
        data = super().clean()
        lo, hi, x0 = data.get("lo"), data.get("hi"), data.get("x0")
        if None in (lo, hi, x0):
            return data
        if not lo <= x0 < hi:
            raise forms.ValidationError("Need lo <= x0 < hi.")
        offset = data.get("xz_offset")
        if offset is None:
            offset = settings.LAGRANGE_XZ_OFFSET
        if "xz_offset" not in self.errors and x0 + offset >= hi:
            self.add_error("xz_offset", f"x0 + xz_offset ({x0 + offset:g}) must stay below hi.")
        s_lo, s_hi = data.get("search_lo"), data.get("search_hi")
        if s_lo is not None and s_hi is not None and s_lo >= s_hi:
            self.add_error("search_hi", "search_hi must exceed search_lo.")
        return data
