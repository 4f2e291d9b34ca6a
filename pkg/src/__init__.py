"""
speech_enhance - Conv-TasNet speech enhancement toolkit
"""
